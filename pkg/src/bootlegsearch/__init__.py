"""Cross-modal MIDI / sheet-music retrieval with bootleg scores and a hashed reverse index."""

from .bootleg import BootlegScore, Variant, pack_column, unpack_fingerprint
from .evaluate import Corpus, EvalReport, SimulationConfig, mrr, run_simulation, sample_query
from .fileio import load_bootleg, save_bootleg
from .index import DEFAULT_THRESHOLD, IndexKey, ReverseIndex, build_index, load_index, lookup, save_index
from .midi import AccidentalMode, extract_midi_features, group_note_events, parse_midi, project_pitch
from .search import QueryBootlegPair, RankedResult, linear_scan_oracle, search

__version__ = "0.1.0"

__all__ = [
    "AccidentalMode", "BootlegScore", "Corpus", "DEFAULT_THRESHOLD", "EvalReport", "IndexKey", "QueryBootlegPair",
    "RankedResult", "ReverseIndex", "SimulationConfig", "Variant", "build_index", "extract_midi_features",
    "group_note_events", "linear_scan_oracle", "load_bootleg", "load_index", "lookup", "mrr", "pack_column",
    "parse_midi", "project_pitch", "run_simulation", "sample_query", "save_bootleg", "save_index", "search",
    "unpack_fingerprint",
]
