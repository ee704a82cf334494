"""Hyperparameters of the sheet-image pipeline and their key/value config format.

Lengths ending in ``_factor`` are multiples of the canonical interline
spacing, so the same settings work at any normalised resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..fileio import ConfigError, parse_key_values


class ParamsError(ConfigError):
    pass


@dataclass(frozen=True)
class SheetHyperparams:
    # pre-processing
    canonical_spacing: float = 10.0
    min_line_spacing: float = 5.0
    max_line_spacing: float = 30.0
    line_spacing_step: float = 0.25
    background_blur_factor: float = 4.0
    spacing_profile_strips: int = 3
    spacing_profile_sigma: float = 0.75
    min_comb_response: float = 1.0

    # notehead detection
    notehead_kernel_factor: float = 0.7
    min_binarize_threshold: float = 0.25
    template_min_area_factor: float = 0.3
    template_max_area_factor: float = 2.0
    template_min_aspect: float = 0.6
    template_max_aspect: float = 2.5
    blob_tolerance_low: float = 0.7
    blob_tolerance_high: float = 1.3
    chord_split: bool = True
    chord_max_notes: int = 4
    chord_area_tolerance: float = 0.5

    # staff line features
    hline_kernel_factor: float = 4.0
    notebar_kernel_height: int = 3
    notebar_removal: float = 0.9
    staff_feature_blocks: int = 10
    staff_spacing_low_factor: float = 0.85
    staff_spacing_high_factor: float = 1.15
    staff_spacing_step: float = 0.25
    staff_peak_rel_threshold: float = 0.5
    min_stave_separation_factor: float = 5.0
    min_staves: int = 2
    max_staves: int = 12
    staff_refine_window_factor: float = 0.5
    staff_refine_min_rel: float = 0.3

    # barline features
    barline_kernel_factor: float = 8.0
    barline_kernel_width: int = 1
    barline_min_row_mass: float = 0.5
    barline_span_fraction: float = 0.8

    # projection
    column_merge_factor: float = 1.0

    def __post_init__(self):
        pairs = [
            ("min_line_spacing", "max_line_spacing"),
            ("template_min_area_factor", "template_max_area_factor"),
            ("template_min_aspect", "template_max_aspect"),
            ("blob_tolerance_low", "blob_tolerance_high"),
            ("staff_spacing_low_factor", "staff_spacing_high_factor"),
            ("min_staves", "max_staves"),
        ]
        for lo, hi in pairs:
            if not getattr(self, lo) < getattr(self, hi):
                raise ParamsError(f"{lo} must be smaller than {hi}")
        if self.canonical_spacing <= 0 or self.line_spacing_step <= 0 or self.staff_spacing_step <= 0:
            raise ParamsError("spacings and steps must be positive")

    # derived pixel sizes at the canonical resolution
    def px(self, factor: float) -> int:
        return max(1, int(round(factor * self.canonical_spacing)))

    def with_(self, **kw) -> "SheetHyperparams":
        return replace(self, **kw)


DEFAULTS = SheetHyperparams()


def _parse_value(kind, raw: str, key: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ParamsError(f"bad value {raw!r} for {key}") from None


_KINDS = {"float": float, "int": int, "bool": bool}


def _fmt(value) -> str:
    return str(value).lower() if isinstance(value, bool) else str(value)


def format_params(params: SheetHyperparams = DEFAULTS) -> str:
    lines = ["# sheet pipeline hyperparameters: key = value, '#' starts a comment"]
    for f in fields(params):
        lines.append(f"{f.name} = {_fmt(getattr(params, f.name))}")
    return "\n".join(lines) + "\n"


def parse_params(text: str, source: str = "<config>") -> SheetHyperparams:
    """Parse a complete config. Every key must be present exactly once."""
    kinds = {f.name: _KINDS[f.type] if isinstance(f.type, str) else f.type for f in fields(SheetHyperparams)}
    try:
        raw = parse_key_values(text, source)
    except ConfigError as exc:
        raise ParamsError(str(exc)) from None
    values = {}
    for key, (value, lineno) in raw.items():
        if key not in kinds:
            raise ParamsError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(kinds[key], value, key)
    for f in fields(SheetHyperparams):
        if f.name not in values:
            raise ParamsError(f"{source}: missing key {f.name!r} (documented default: {_fmt(getattr(DEFAULTS, f.name))})")
    return SheetHyperparams(**values)


def load_params(path: str | Path) -> SheetHyperparams:
    return parse_params(Path(path).read_text(encoding="utf-8"), str(path))
