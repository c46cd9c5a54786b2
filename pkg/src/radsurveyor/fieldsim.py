"""Synthetic ground truth: terrain, point-source radiation field, detectors.

The forward model is pure inverse-square; a detector at height h above
terrain sees B + sum_r alpha_r / ((x-x_r)^2 + (y-y_r)^2 + h^2) counts
per second.  Spectral behavior is abstracted to two energy windows (one
per supported isotope) with a configurable fraction of the high-energy
isotope's counts leaking into the low-energy window.

Counts are drawn from a Poisson sampler built on a named 64-bit seeded
generator so simulated surveys are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ExtentError
from .geo import Dem, Trajectory, dem_sample_array

ISOTOPES = ("Co60", "Cs137")

# calibration defaults; the emission constant folds detector efficiency
# into a single per-MBq factor, so only ratios are physical
DEFAULT_EMISSION_PER_MBQ = 100.0  # counts*m^2/s per MBq
DEFAULT_DOSE_PER_COUNT = 7e-4  # uGy/h per count/s
DEFAULT_WINDOW_FRACTION = {"Co60": 0.40, "Cs137": 0.40}
DEFAULT_STRIPPING = 0.30
DEFAULT_WINDOW_BG_FRACTION = {"Co60": 0.10, "Cs137": 0.10}
DEFAULT_GROUND_HEIGHT = 0.5  # detector height on the UGV chassis


def emission_from_activity(isotope: str, activity_mbq: float, per_mbq: float = DEFAULT_EMISSION_PER_MBQ) -> float:
    """Emission parameter (counts*m^2/s) for a source of the given activity."""
    if isotope not in ISOTOPES:
        raise ConfigError(f"unknown isotope: {isotope}")
    if activity_mbq <= 0 or per_mbq <= 0:
        raise DomainError("activity and calibration constant must be positive")
    return activity_mbq * per_mbq


def dose_from_counts(cps: float, dose_per_count: float = DEFAULT_DOSE_PER_COUNT) -> float:
    """Dose rate in uGy/h for a count rate in counts/s."""
    if dose_per_count <= 0:
        raise DomainError("dose_per_count must be positive")
    return cps * dose_per_count


def counts_from_dose(dose: float, dose_per_count: float = DEFAULT_DOSE_PER_COUNT) -> float:
    if dose_per_count <= 0:
        raise DomainError("dose_per_count must be positive")
    return dose / dose_per_count


@dataclass(frozen=True)
class RadSource:
    """One gamma point source on the ground plane."""

    isotope: str
    activity_mbq: float
    x: float
    y: float
    emission: float  # counts*m^2/s, activity folded with the detector constant

    def __post_init__(self):
        if self.isotope not in ISOTOPES:
            raise ConfigError(f"unknown isotope: {self.isotope}")
        if self.activity_mbq <= 0 or self.emission <= 0:
            raise DomainError("activity and emission must be positive")

    @classmethod
    def from_activity(cls, isotope, activity_mbq, x, y, per_mbq=DEFAULT_EMISSION_PER_MBQ):
        return cls(isotope, activity_mbq, x, y, emission_from_activity(isotope, activity_mbq, per_mbq))


@dataclass(frozen=True)
class RadiationField:
    """Point sources plus a flat background, with window calibration."""

    sources: tuple
    background_cps: float = 100.0
    dose_per_count: float = DEFAULT_DOSE_PER_COUNT
    window_fraction: dict = field(default_factory=lambda: dict(DEFAULT_WINDOW_FRACTION))
    stripping: float = DEFAULT_STRIPPING
    window_bg_fraction: dict = field(default_factory=lambda: dict(DEFAULT_WINDOW_BG_FRACTION))

    def __post_init__(self):
        if self.background_cps < 0:
            raise DomainError("background_cps must be >= 0")
        if self.dose_per_count <= 0:
            raise DomainError("dose_per_count must be positive")
        object.__setattr__(self, "sources", tuple(self.sources))

    @property
    def background_dose(self) -> float:
        return dose_from_counts(self.background_cps, self.dose_per_count)


@dataclass(frozen=True)
class Measurement:
    """One detector integration at a known position."""

    t: float
    x: float
    y: float
    z_agl: float
    counts: float
    dose_rate: float
    w_cs: float | None = None
    w_co: float | None = None

    def __post_init__(self):
        if self.counts < 0:
            raise DomainError("counts must be >= 0")
        if self.z_agl <= 0:
            raise DomainError("z_agl must be positive")


def _source_rates(field: RadiationField, x, y, z_agl):
    """Per-isotope summed source count rates at the detector position."""
    rates = {iso: 0.0 for iso in ISOTOPES}
    for s in field.sources:
        d2 = (x - s.x) ** 2 + (y - s.y) ** 2 + z_agl**2
        rates[s.isotope] += s.emission / d2
    return rates


def expected_intensity(field: RadiationField, x: float, y: float, z_agl: float) -> float:
    """Expected total count rate (counts/s) at the detector position."""
    if z_agl <= 0:
        raise DomainError("z_agl must be positive: the model is singular at d=0")
    rates = _source_rates(field, x, y, z_agl)
    return field.background_cps + rates["Co60"] + rates["Cs137"]


def expected_window_rates(field: RadiationField, x: float, y: float, z_agl: float) -> tuple[float, float]:
    """(cs_window, co_window) expected count rates, including leakage."""
    if z_agl <= 0:
        raise DomainError("z_agl must be positive")
    rates = _source_rates(field, x, y, z_agl)
    co_win = field.window_fraction["Co60"] * rates["Co60"] + field.window_bg_fraction["Co60"] * field.background_cps
    cs_win = (
        field.window_fraction["Cs137"] * rates["Cs137"]
        + field.stripping * field.window_fraction["Co60"] * rates["Co60"]
        + field.window_bg_fraction["Cs137"] * field.background_cps
    )
    return cs_win, co_win


# ---------------------------------------------------------------------------
# Poisson sampling
# ---------------------------------------------------------------------------

_NORMAL_APPROX_ABOVE = 1e4
_CHUNK = 500.0  # exp(-500) is still representable; exp(-746) is not


def poisson_draw(rng: np.random.Generator, mean: float) -> int:
    """Poisson sample via inverse transform, normal approx above 1e4.

    Means above the inverse-transform's underflow limit are split into
    chunks of <= 500 and summed, which preserves the exact distribution.
    """
    if mean < 0:
        raise DomainError("mean must be >= 0")
    if mean == 0:
        return 0
    if mean > _NORMAL_APPROX_ABOVE:
        return max(0, int(round(rng.normal(mean, math.sqrt(mean)))))
    total = 0
    remaining = mean
    while remaining > _CHUNK:
        total += _inverse_transform(rng, _CHUNK)
        remaining -= _CHUNK
    return total + _inverse_transform(rng, remaining)


def _inverse_transform(rng: np.random.Generator, lam: float) -> int:
    u = rng.random()
    p = math.exp(-lam)
    cum = p
    k = 0
    kmax = int(lam + 12 * math.sqrt(lam) + 60)  # tail guard against float saturation
    while u > cum and k < kmax:
        k += 1
        p *= lam / k
        cum += p
    return k


# ---------------------------------------------------------------------------
# Terrain synthesis
# ---------------------------------------------------------------------------


def synth_terrain(spec: dict) -> Dem:
    """Deterministic DEM from a feature-list terrain spec.

    Spec keys: width, height (meters), cell_size, optional origin_x/y,
    base_height, seed, and features: a list of dicts with a "type" of
    ramp | hill | step | noise.
    """
    width = float(spec["width"])
    height = float(spec["height"])
    cell = float(spec["cell_size"])
    if width <= 0 or height <= 0 or cell <= 0:
        raise ConfigError("terrain extent and cell_size must be positive")
    ox = float(spec.get("origin_x", 0.0))
    oy = float(spec.get("origin_y", 0.0))
    cols = max(1, int(round(width / cell)))
    rows = max(1, int(round(height / cell)))
    xs = ox + (np.arange(cols) + 0.5) * cell
    ys = oy + (np.arange(rows) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    h = np.full((rows, cols), float(spec.get("base_height", 0.0)))
    seed = int(spec.get("seed", 0))
    for k, feat in enumerate(spec.get("features", [])):
        kind = feat["type"]
        if kind == "ramp":
            theta = math.radians(float(feat.get("direction_deg", 0.0)))
            d = gx * math.cos(theta) + gy * math.sin(theta)
            start = float(feat["start"])
            span = float(feat["span"])
            slope = math.tan(math.radians(float(feat["slope_deg"])))
            t = np.clip((d - start) / span, 0.0, 1.0)
            h = h + slope * span * t
        elif kind == "hill":
            sigma = float(feat["sigma"])
            # peak gradient of a gaussian bump is ~0.607*height/sigma
            h = h + float(feat["height"]) * np.exp(
                -((gx - feat["cx"]) ** 2 + (gy - feat["cy"]) ** 2) / (2 * sigma**2)
            )
        elif kind == "step":
            theta = math.radians(float(feat.get("direction_deg", 0.0)))
            d = gx * math.cos(theta) + gy * math.sin(theta)
            h = h + float(feat["height"]) * (d >= float(feat["at"]))
        elif kind == "noise":
            scale = max(float(feat.get("scale", 5.0)), cell)
            amp = float(feat.get("amplitude", 0.1))
            rng = np.random.default_rng(np.random.PCG64(seed + k + 1))
            nc = max(2, int(math.ceil(width / scale)) + 1)
            nr = max(2, int(math.ceil(height / scale)) + 1)
            coarse = rng.normal(0.0, 1.0, size=(nr, nc))
            # bilinear upsample of the coarse lattice
            u = (gx - ox) / scale
            v = (gy - oy) / scale
            j0 = np.clip(np.floor(u).astype(int), 0, nc - 2)
            i0 = np.clip(np.floor(v).astype(int), 0, nr - 2)
            fu = np.clip(u - j0, 0.0, 1.0)
            fv = np.clip(v - i0, 0.0, 1.0)
            h = h + amp * (
                coarse[i0, j0] * (1 - fu) * (1 - fv)
                + coarse[i0, j0 + 1] * fu * (1 - fv)
                + coarse[i0 + 1, j0] * (1 - fu) * fv
                + coarse[i0 + 1, j0 + 1] * fu * fv
            )
        else:
            raise ConfigError(f"unknown terrain feature type: {kind}")
    return Dem(ox, oy, cell, h)


# ---------------------------------------------------------------------------
# Survey simulation
# ---------------------------------------------------------------------------


def simulate_survey(
    field: RadiationField,
    dem: Dem,
    traj: Trajectory,
    z_agl_mode: str = "aerial",
    seed: int = 0,
    ground_height: float = DEFAULT_GROUND_HEIGHT,
    with_windows: bool = False,
) -> list[Measurement]:
    """Simulate one detector integration per sampling period along traj.

    In "aerial" mode the detector height above ground is the trajectory z
    minus the terrain height; in "ground" mode it is the fixed
    ground_height.  Deterministic for a fixed seed.
    """
    if z_agl_mode not in ("aerial", "ground"):
        raise ConfigError(f"unknown z_agl_mode: {z_agl_mode}")
    period = traj.sampling_period
    total_time = traj.length / traj.speed
    n = int(math.floor(total_time / period + 1e-9))
    rng = np.random.default_rng(np.random.PCG64(seed))
    out: list[Measurement] = []
    if n == 0:
        return out
    ts = (np.arange(n) + 1) * period
    pts = np.stack([traj.point_at(t * traj.speed) for t in ts])
    terrain = dem_sample_array(dem, pts[:, 0], pts[:, 1])  # raises ExtentError outside
    if z_agl_mode == "aerial":
        z_agl = pts[:, 2] - terrain
        if np.any(z_agl <= 0):
            raise DomainError("aerial trajectory dips to or below the terrain")
    else:
        z_agl = np.full(n, ground_height)
    for k in range(n):
        x, y, h = float(pts[k, 0]), float(pts[k, 1]), float(z_agl[k])
        lam = expected_intensity(field, x, y, h) * period
        counts = poisson_draw(rng, lam)
        w_cs = w_co = None
        if with_windows:
            cs_rate, co_rate = expected_window_rates(field, x, y, h)
            w_cs = float(poisson_draw(rng, cs_rate * period))
            w_co = float(poisson_draw(rng, co_rate * period))
        out.append(
            Measurement(
                t=float(ts[k]),
                x=x,
                y=y,
                z_agl=h,
                counts=float(counts),
                dose_rate=dose_from_counts(counts / period, field.dose_per_count),
                w_cs=w_cs,
                w_co=w_co,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Measurement CSV format: t,x,y,z_agl,counts,dose_rate[,w_cs,w_co]
# ---------------------------------------------------------------------------


def measurements_to_csv(ms: list[Measurement], header_comment: str | None = None) -> str:
    windows = any(m.w_cs is not None for m in ms)
    lines = []
    if header_comment:
        lines.append(f"# {header_comment}")
    cols = "t,x,y,z_agl,counts,dose_rate"
    if windows:
        cols += ",w_cs,w_co"
    lines.append(cols)
    for m in ms:
        row = f"{m.t!r},{m.x!r},{m.y!r},{m.z_agl!r},{m.counts!r},{m.dose_rate!r}"
        if windows:
            row += f",{(m.w_cs if m.w_cs is not None else 0.0)!r},{(m.w_co if m.w_co is not None else 0.0)!r}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def measurements_from_csv(text: str) -> list[Measurement]:
    out = []
    header = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = line.split(",")
            continue
        vals = line.split(",")
        rec = dict(zip(header, vals))
        out.append(
            Measurement(
                t=float(rec["t"]),
                x=float(rec["x"]),
                y=float(rec["y"]),
                z_agl=float(rec["z_agl"]),
                counts=float(rec["counts"]),
                dose_rate=float(rec["dose_rate"]),
                w_cs=float(rec["w_cs"]) if "w_cs" in rec else None,
                w_co=float(rec["w_co"]) if "w_co" in rec else None,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


def field_from_scenario(scenario: dict) -> RadiationField:
    cal = scenario.get("calibration", {})
    per_mbq = float(cal.get("emission_per_mbq", DEFAULT_EMISSION_PER_MBQ))
    sources = tuple(
        RadSource.from_activity(s["isotope"], float(s["activity_mbq"]), float(s["x"]), float(s["y"]), per_mbq)
        for s in scenario.get("sources", [])
    )
    return RadiationField(
        sources=sources,
        background_cps=float(scenario.get("background_cps", 100.0)),
        dose_per_count=float(cal.get("dose_per_count", DEFAULT_DOSE_PER_COUNT)),
        window_fraction=dict(cal.get("window_fraction", DEFAULT_WINDOW_FRACTION)),
        stripping=float(cal.get("stripping", DEFAULT_STRIPPING)),
        window_bg_fraction=dict(cal.get("window_bg_fraction", DEFAULT_WINDOW_BG_FRACTION)),
    )
