"""Named scenarios.  Each is a plain section/key table fed to the config parser."""

from __future__ import annotations

import math

from .config import SimulationConfig, config_from_sections

# near-delta data with spectrum bump(|xi|/K): frequencies up to 2K, grid
# spacing pi/(3K) keeps them well inside the Nyquist range
_DECAY_P = 16384
_DECAY_L = _DECAY_P * math.pi / 6.0
_DECAY_T = _DECAY_L / (4.0 * 2.0**3)

PRESETS: dict[str, dict] = {
    "linear_decay": {
        "equation": {"n": 1, "lambda": 0},
        "geometry": {"kind": "full", "points": _DECAY_P, "extent": repr(_DECAY_L)},
        "initial_condition": {"kind": "near_delta", "K": 1.0},
        "time": {"t_end": repr(_DECAY_T), "dt_max": repr(_DECAY_T / 64), "snapshot_every": 1},
        "probe decay": {"t_start": 3.0, "t_stop": repr(_DECAY_T)},
        "checks": {"mass_drift": 1e-10},
        "output": {"directory": "linear_decay"},
    },
    "band_decay": {
        "equation": {"n": 1, "lambda": 0},
        "geometry": {"kind": "full", "points": 8192, "extent": 409.6},
        "initial_condition": {"kind": "band", "N": 8},
        # N^4 t in [16, 100]; waves at |xi| <= 2N cross the box after t = L / (4 (2N)^3)
        "time": {"t_end": 0.025, "dt_max": 0.025 / 32, "snapshot_every": 1},
        "probe band_decay": {"t_start": 16 / 8**4, "t_stop": 0.025},
        "checks": {"mass_drift": 1e-10},
        "output": {"directory": "band_decay"},
    },
    "refined_strichartz": {
        "equation": {"n": 1, "lambda": 0},
        "geometry": {"kind": "full", "points": 4096, "extent": 160},
        "initial_condition": {"kind": "random_smooth", "seed": 0, "bandwidth": 1.0, "window": 2.5},
        "time": {"t_end": 0.05, "dt_max": 0.05 / 64, "snapshot_every": 4},
        "probe refined_strichartz": {"T": 0.05},
        "output": {"directory": "refined_strichartz"},
    },
    "defocusing_scatter": {
        "equation": {"n": 1, "lambda": 1},
        "geometry": {"kind": "full", "points": 1024, "extent": 160},
        "initial_condition": {"kind": "gaussian", "width": 4.0, "mass": 1e-2},
        "time": {"t_end": 50, "dt_max": 1e-2, "snapshot_every": 250},
        "probe scattering": {"eps": 1e-3, "expect": "fire"},
        "checks": {"mass_drift": 1e-10, "expect_outcome": "scattering"},
        "output": {"directory": "defocusing_scatter"},
    },
    "focusing_subthreshold": {
        "equation": {"n": 1, "lambda": -1},
        "geometry": {"kind": "full", "points": 1024, "extent": 20},
        "initial_condition": {"kind": "ground_state_scaled", "mass_multiple": 0.9},
        "time": {"t_end": 20, "dt_max": 1e-3, "snapshot_every": 100},
        "checks": {"mass_drift": 1e-10, "forbid_blowup": "true", "max_h2_ratio": 3.0},
        "output": {"directory": "focusing_subthreshold"},
    },
    "focusing_blowup_probe": {
        "equation": {"n": 1, "lambda": -1},
        "geometry": {"kind": "full", "points": 4096, "extent": 20},
        # amplitude 1.2 Q, i.e. mass 1.44 M(Q)
        "initial_condition": {"kind": "ground_state_scaled", "mass_multiple": 1.44},
        "time": {"t_end": 1.0, "dt_max": 1e-3, "dt_min": 1e-9, "adaptive": "true", "snapshot_every": 20,
                 "sup_threshold_factor": 4.0},
        "probe blowup_fit": {"beta": 0.25, "beta_tol": 0.1},
        "output": {"directory": "focusing_blowup_probe"},
    },
    "standing_wave": {
        "equation": {"n": 1, "lambda": -1},
        "geometry": {"kind": "full", "points": 1024, "extent": 20},
        "initial_condition": {"kind": "ground_state_scaled", "mass_multiple": 1.0},
        # dense snapshots: the scattering window ends where the spectral tail
        # of Q would wrap around the box (t ~ 0.1)
        "time": {"t_end": 1.0, "dt_max": 1e-3, "snapshot_every": 2},
        "probe standing_wave": {"tol": 1e-6},
        "probe scattering": {"expect": "no_fire"},
        "probe duhamel": {"t0": 0.0, "t1": 0.48, "method": "filon", "tol": 1e-4},
        "checks": {"mass_drift": 1e-10, "expect_outcome": "soliton-like"},
        "output": {"directory": "standing_wave"},
    },
    "symmetry_audit": {
        "equation": {"n": 1, "lambda": -1},
        "geometry": {"kind": "full", "points": 1024, "extent": 80},
        "initial_condition": {"kind": "gaussian", "width": 4.0, "amplitude": 0.6},
        # the scaled companion run covers t_end / h^4 = 0.125 with dt = 1e-3
        "time": {"t_end": 2.0, "dt_max": 0.016, "snapshot_every": 4},
        "probe symmetry": {"h": 2.0},
        "checks": {"mass_drift": 1e-10},
        "output": {"directory": "symmetry_audit"},
    },
    "virial_audit": {
        "equation": {"n": 1, "lambda": 1},
        "geometry": {"kind": "full", "points": 2048, "extent": 120},
        "initial_condition": {"kind": "boosted_gaussian", "width": 3.0, "amplitude": 0.8, "boost": 0.3},
        "time": {"t_end": 4.0, "dt_max": 1e-3, "snapshot_every": 50},
        "probe virial": {"R": 48},
        "probe mass_moment": {"R": 48},
        "checks": {"mass_drift": 1e-10, "momentum_drift": 1e-10},
        "output": {"directory": "virial_audit"},
    },
    "groundstate_table": {
        "equation": {"n": 1, "lambda": -1},
        "geometry": {"kind": "full", "points": 1024, "extent": 20},
        "initial_condition": {"kind": "ground_state_scaled", "mass_multiple": 1.0},
        "time": {"t_end": 0.0},
        "probe groundstate_table": {"full_dims": 1, "full_points": "1024, 2048", "full_extent": 20,
                                    "radial_dims": 5, "radial_points": "512, 1024", "radial_extent": 30},
        "output": {"directory": "groundstate_table"},
    },
}


def list_presets() -> list:
    return sorted(PRESETS)


def preset_config(name: str) -> SimulationConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    sections = {s: {k: str(v) for k, v in kv.items()} for s, kv in PRESETS[name].items()}
    return config_from_sections(sections, source=f"<preset {name}>")
