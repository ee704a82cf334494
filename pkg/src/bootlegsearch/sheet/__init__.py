"""Sheet-music page images to bootleg scores."""

from .noteheads import NoteheadBlob, detect_noteheads
from .params import DEFAULTS, ParamsError, SheetHyperparams, format_params, load_params, parse_params
from .pipeline import EmptyPieceError, PageResult, analyze_page, analyze_piece, draw_overlay, page_bootleg, piece_bootleg
from .preprocess import ImageDecodeError, NoStaffDetected, PageError, Preprocessed, load_image, preprocess
from .project import StaffPairingError, project_page, project_page_details
from .staff import BarlineFeatures, Staff, StaffLineFeatures, compute_barline_features, compute_staffline_features, locate_staves

__all__ = [
    "BarlineFeatures", "DEFAULTS", "EmptyPieceError", "ImageDecodeError", "NoStaffDetected", "NoteheadBlob",
    "PageError", "PageResult", "ParamsError", "Preprocessed", "SheetHyperparams", "Staff", "StaffLineFeatures",
    "StaffPairingError", "analyze_page", "analyze_piece", "compute_barline_features", "compute_staffline_features",
    "detect_noteheads", "draw_overlay", "format_params", "load_image", "load_params", "locate_staves",
    "page_bootleg", "parse_params", "piece_bootleg", "preprocess", "project_page", "project_page_details",
]
