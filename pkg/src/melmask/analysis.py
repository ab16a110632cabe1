"""Quality metrics, deployment estimators, and hardware budget checks.

The speedup estimator interpolates a per-structure anchor table whose
defaults come from published measurements; substitute measured anchors
with a plain-text file of (structure, sparsity, factor) triples. Footprint
separates stored weight bytes (the headline model size), index overhead of
the sparse encodings, and working memory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import LstmLayer, SeModel, mat_active_shape, ops_per_frame
from .sparse import SparseMatrix, StructureKind

SDR_CAP_DB = 100.0


class SilentReferenceError(ValueError):
    """SI-SDR reference signal has zero energy."""


def si_sdr(reference: np.ndarray, estimate: np.ndarray) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +/-100."""
    s = np.asarray(reference, dtype=np.float64)
    e = np.asarray(estimate, dtype=np.float64)
    if s.shape != e.shape:
        raise ValueError("reference and estimate must have equal length")
    s_energy = float(np.dot(s, s))
    if s_energy == 0.0:
        raise SilentReferenceError("reference is silent")
    alpha = float(np.dot(e, s)) / s_energy
    target = alpha * s
    num = float(np.dot(target, target))
    den = float(np.sum((target - e) ** 2))
    if num == 0.0:
        return -SDR_CAP_DB  # estimate carries none of the reference
    if den == 0.0:
        return SDR_CAP_DB
    return float(np.clip(10.0 * np.log10(num / den), -SDR_CAP_DB, SDR_CAP_DB))


def _complex_power(x: np.ndarray, p: float) -> np.ndarray:
    mag = np.abs(x) ** p
    return mag * np.exp(1j * np.angle(x))


def psa_loss(clean_frames: np.ndarray, estimate_frames: np.ndarray,
             power_exponent: float = 0.3) -> float:
    """Phase-sensitive spectral approximation distance between frame sets.

    0.1 times the magnitude-spectrum distance plus 0.9 times the complex
    distance, both power-compressed. The estimate frames should come from
    re-analyzing the resynthesized time signal so they are consistent.
    """
    x = np.asarray(clean_frames)
    xh = np.asarray(estimate_frames)
    if x.shape != xh.shape:
        raise ValueError("frame sets must have equal shape")
    mag_term = np.linalg.norm(np.abs(x) ** power_exponent - np.abs(xh) ** power_exponent)
    cpx_term = np.linalg.norm(_complex_power(x, power_exponent) - _complex_power(xh, power_exponent))
    return float(0.1 * mag_term + 0.9 * cpx_term)


def q_score(stoi: float, pesq: float, si_sdr_db: float) -> float:
    """Model-selection heuristic: separation first, then quality and clarity."""
    return 0.1 * stoi + 0.2 * pesq + 0.6 * si_sdr_db


# Anchors: (fraction of weights removed, throughput factor vs dense).
DEFAULT_SPEEDUP_ANCHORS: dict[StructureKind, tuple[tuple[float, float], ...]] = {
    StructureKind.WEIGHT: ((0.0, 1.0), (0.485, 0.6), (0.701, 0.6), (0.907, 1.84)),
    StructureKind.BLOCK: ((0.0, 1.0), (0.402, 1.7), (0.742, 2.7), (0.907, 6.7)),
    StructureKind.UNIT: ((0.0, 1.0), (0.371, 2.2), (0.660, 3.3)),
}


@dataclass(frozen=True)
class SpeedupModel:
    """Piecewise-linear sparsity-to-speedup curves, one per structure."""

    anchors: dict[StructureKind, tuple[tuple[float, float], ...]]

    def __post_init__(self):
        fixed = {}
        for kind, pts in self.anchors.items():
            pts = tuple(sorted((float(s), float(f)) for s, f in pts))
            if not pts or any(f <= 0 for _, f in pts):
                raise ValueError("anchors must be nonempty with positive factors")
            fixed[kind] = pts
        object.__setattr__(self, "anchors", fixed)

    def estimate(self, structure: StructureKind, sparsity: float) -> float:
        pts = self.anchors[structure]
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        # np.interp clamps to the end anchors outside the range.
        return float(np.interp(sparsity, xs, ys))


DEFAULT_SPEEDUP = SpeedupModel(DEFAULT_SPEEDUP_ANCHORS)


def parse_anchor_file(text: str) -> SpeedupModel:
    """Parse (structure, sparsity, factor) triples, one per line, '#' comments."""
    table: dict[StructureKind, list[tuple[float, float]]] = {
        k: [] for k in StructureKind}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'structure sparsity factor'")
        kind = StructureKind(parts[0])
        table[kind].append((float(parts[1]), float(parts[2])))
    for kind in StructureKind:
        if not any(s == 0.0 for s, _ in table[kind]):
            table[kind].append((0.0, 1.0))
    return SpeedupModel({k: tuple(v) for k, v in table.items()})


def estimate_speedup(structure: StructureKind, sparsity: float,
                     model: SpeedupModel = DEFAULT_SPEEDUP) -> float:
    if not 0.0 <= sparsity < 1.0:
        raise ValueError("sparsity must be in [0, 1)")
    return model.estimate(structure, sparsity)


@dataclass(frozen=True)
class HwProfile:
    """The three numbers that matter for a microNPU budget check."""

    macs_per_cycle: int = 8
    clock_hz: float = 100e6
    sram_bytes: int = 640 * 1024

    def __post_init__(self):
        if self.macs_per_cycle <= 0 or self.clock_hz <= 0 or self.sram_bytes <= 0:
            raise ValueError("hardware profile values must be positive")


@dataclass(frozen=True)
class FootprintEstimate:
    value_bytes: int   # stored weights + biases (the headline model size)
    index_bytes: int   # sparse-encoding metadata
    working_bytes: int  # activations, states, framing buffers

    @property
    def total_bytes(self) -> int:
        return self.value_bytes + self.index_bytes + self.working_bytes

    def to_dict(self) -> dict:
        return {"value_bytes": self.value_bytes, "index_bytes": self.index_bytes,
                "working_bytes": self.working_bytes, "total_bytes": self.total_bytes}


def _matrix_bytes(m, float32: bool) -> tuple[int, int]:
    if isinstance(m, SparseMatrix):
        per = 4 if float32 else m.fmt.bits // 8
        if m.kind is StructureKind.WEIGHT:
            vals = len(m.values)
        elif m.kind is StructureKind.BLOCK:
            vals = m.blocks.size
        else:
            vals = m.dense.size
        return vals * per, m.index_bytes()
    per = 4 if float32 else m.fmt.bits // 8
    return int(np.prod(m.shape)) * per, 0


def estimate_footprint(model: SeModel, float32: bool = False) -> FootprintEstimate:
    """Deployed memory: weights at their stored widths plus working memory.

    float32=True prices the same architecture in 4-byte weights and
    activations (the unquantized baseline).
    """
    value_b = 0
    index_b = 0
    for _, layer in model.layers():
        if isinstance(layer, LstmLayer):
            mats = list(layer.matrices().values())
            biases = list(layer.biases().values())
        else:
            mats, biases = [layer.w], [layer.b]
        for m in mats:
            v, i = _matrix_bytes(m, float32)
            value_b += v
            index_b += i
        for b in biases:
            value_b += len(b.data) * (4 if float32 else b.fmt.bits // 8)

    cfg = model.dsp
    act = 4 if float32 else 1
    cell = 4 if float32 else 2
    h1, h2 = model.lstm1.active_hidden, model.lstm2.active_hidden
    d1 = mat_active_shape(model.dense1.w)[0]
    working = (
        cfg.frame_size * 2            # input staging, 16-bit PCM
        + cfg.frame_size * 4          # overlap-add accumulator, f32
        + cfg.bins * 8                # complex spectrum, f32 pairs
        + cfg.mel_bins * 4 * 2        # float features and mel mask
        + cfg.bins * 4                # frequency-domain mask
        + (cfg.mel_bins + h1 + h2 + d1) * act  # quantized activations
        + (h1 + h2) * (act + cell)    # recurrent state
        + cfg.mel_bins * 2            # mask codes
    )
    return FootprintEstimate(value_b, index_b, working)


@dataclass(frozen=True)
class BudgetCheck:
    value: float
    limit: float
    ok: bool


@dataclass(frozen=True)
class ConstraintReport:
    """Deployability verdict against the four microNPU constraints.

    The sub-30ms audio-latency figure is reported alongside but does not
    gate the overall verdict (it is a soft target; the frame length alone
    exceeds it at 16 kHz).
    """

    causal: bool
    quantized: bool
    compute: BudgetCheck        # seconds per frame vs hop deadline
    footprint: BudgetCheck      # total bytes vs SRAM
    audio_latency: BudgetCheck  # seconds vs 0.030

    @property
    def overall(self) -> bool:
        return self.causal and self.quantized and self.compute.ok and self.footprint.ok

    def to_dict(self) -> dict:
        def bc(c: BudgetCheck) -> dict:
            return {"value": c.value, "limit": c.limit, "ok": c.ok}
        return {"causal": self.causal, "quantized": self.quantized,
                "compute_latency": bc(self.compute), "footprint": bc(self.footprint),
                "audio_latency": bc(self.audio_latency), "overall": self.overall}


AUDIO_LATENCY_BUDGET_S = 0.030


def validate_constraints(model: SeModel, hw: HwProfile) -> ConstraintReport:
    deadline = model.dsp.frame_deadline_s
    latency = ops_per_frame(model) / (hw.macs_per_cycle * hw.clock_hz)
    total = estimate_footprint(model).total_bytes
    audio = model.dsp.audio_latency_s
    return ConstraintReport(
        causal=model.is_causal,
        quantized=model.is_quantized,
        compute=BudgetCheck(latency, deadline, latency <= deadline),
        footprint=BudgetCheck(total, hw.sram_bytes, total <= hw.sram_bytes),
        audio_latency=BudgetCheck(audio, AUDIO_LATENCY_BUDGET_S, audio <= AUDIO_LATENCY_BUDGET_S),
    )
