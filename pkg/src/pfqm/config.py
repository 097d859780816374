"""Experiment configuration: TOML documents with unit-suffixed keys.

Every physical key names its unit in a suffix (``_um``, ``_per_ps``,
``_mev_um2`` ...). Unknown sections or keys are rejected with the offending
key path. Missing keys take the defaults below; the merged result is the
effective configuration that gets echoed next to the outputs.
"""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import dispersion as disp
from .dynamics import (
    Gaussian,
    Harmonic,
    Homogeneous,
    MexicanHat,
    ModelParams,
    NoPotential,
    PumpSpec,
    SimState,
)
from .spectral import Grid, SpectralField

UNIT_SUFFIXES = (
    "_um",
    "_per_um",
    "_mev",
    "_mev_um2",
    "_mev_um2s",
    "_per_ps",
    "_ps",
    "_me",
    "_um_per_ps",
)

# (default, allowed python types); None default means "required when used"
SCHEMA = {
    "grid": {
        "dim": (2, int),
        "length_x_um": (50.0, float),
        "length_y_um": (50.0, float),
        "points_x": (256, int),
        "points_y": (256, int),
    },
    "cavity": {
        "exciton_energy_mev": (1557.0, float),
        "cavity_offset_mev": (1557.0, float),
        "photon_mass_me": (1e-4, float),
        "exciton_mass_me": (0.5, float),
        "rabi_mev": (disp.DEFAULT_RABI, float),
        "exact_cavity": (False, bool),
    },
    "kinetic": {
        "model": ("curvature", str),
        "prefactor_half": (True, bool),
        # constant mass; 0 selects the lower-branch mass at k = 0
        "mass_me": (0.0, float),
        "s": (5.0 / 6.0, float),
        "coefficient_mev_um2s": (1.0, float),
        "table_path": ("", str),
    },
    "model": {
        "alpha_mev_um2": (0.005, float),
        "gamma_per_ps": (0.1, float),
        "eta": (0.01, float),
        "omega_mev": (0.0, float),
    },
    "pump": {
        "profile": ("gaussian", str),
        "amplitude_mev": (0.0, float),
        "width_um": (5.0, float),
        "center_x_um": (0.0, float),
        "center_y_um": (0.0, float),
        "k_x_per_um": (0.0, float),
        "k_y_per_um": (0.0, float),
        # fixed: omega_i_mev; resonant: omega + g(|k_i|) + detuning;
        # lower_branch: omega + E_L(|k_i|) - E_L(0) + detuning
        "omega_mode": ("fixed", str),
        "omega_i_mev": (0.0, float),
        "detuning_mev": (0.0, float),
    },
    "potential": {
        "kind": ("none", str),
        "strength_mev_um2": (0.0, float),
        "hat_amplitude_mev": (0.0, float),
        "hat_width_um": (1.0, float),
    },
    "run": {
        "t_final_ps": (10.0, float),
        "dt_ps": (0.01, float),
        "stride": (10, int),
        "snapshot_stride": (0, int),
        "substeps": (4, int),
        "order": ("LKL", str),
        "watchdog": (1e6, float),
        "initial": ("gaussian", str),
        "initial_width_um": (1.0, float),
        "initial_amplitude": (1.0, float),
        "noise_amplitude": (0.0, float),
    },
    "sweep": {
        # empty a_values: a single run; otherwise k_i = (sqrt2/2)(a, a) per entry
        "a_values_per_um": ([], list),
        "models": (["curvature", "constant"], list),
        "ring_bins": (64, int),
    },
    "dispersion": {
        "k_max_per_um": (5.0, float),
        "samples": (501, int),
        "fractional_s": (5.0 / 6.0, float),
        # the fractional column is fitted to the curvature symbol on (0, window]
        "fit_window_per_um": (0.5, float),
    },
    "planewave": {
        "kappa_per_um": (2.0, float),
        "omega_i_mev": (0.5, float),
        "p0_max_mev": (1.0, float),
        "p0_points": (200, int),
    },
    "response": {
        "mu_mev": (1.0, float),
        "gamma_per_ps": (1.0, float),
        "v_x_um_per_ps": (0.0, float),
        "v_y_um_per_ps": (1.0, float),
        "pump_ft_re": (1.0, float),
        "pump_ft_im": (0.0, float),
        "k_max_per_um": (4.0, float),
        "points": (128, int),
    },
    "output": {
        # raster images next to the CSV maps (needs matplotlib)
        "image": (False, bool),
        # final density and phase as CSV grids (2D runs)
        "field_csv": (True, bool),
    },
}

DIMENSIONLESS = {
    "dim", "points_x", "points_y", "exact_cavity", "model", "prefactor_half", "s", "table_path",
    "eta", "profile", "omega_mode", "kind", "stride", "snapshot_stride", "substeps", "order",
    "watchdog", "initial", "initial_amplitude", "noise_amplitude", "models", "ring_bins",
    "samples", "fractional_s", "p0_points", "pump_ft_re", "pump_ft_im", "points", "image",
    "initial_width_um", "field_csv",
}

KINETIC_MODELS = ("curvature", "constant", "fractional", "tabulated")
OMEGA_MODES = ("fixed", "resonant", "lower_branch")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted key that caused it."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def defaults() -> dict:
    return {sec: {k: copy.deepcopy(v[0]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def _coerce(path, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(path, f"expected {kind.__name__}, got {value!r}")
    return value


def merge(doc: dict) -> dict:
    """Validate ``doc`` against the schema and overlay it on the defaults."""
    cfg = defaults()
    for section, body in doc.items():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "section must be a table")
        for key, value in body.items():
            path = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ConfigError(path, "unknown key")
            cfg[section][key] = _coerce(path, value, SCHEMA[section][key][1])
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    g = cfg["grid"]
    if g["dim"] not in (1, 2):
        raise ConfigError("grid.dim", "must be 1 or 2")
    k = cfg["kinetic"]
    if k["model"] not in KINETIC_MODELS:
        raise ConfigError("kinetic.model", f"must be one of {KINETIC_MODELS}")
    if cfg["pump"]["profile"] not in ("gaussian", "homogeneous"):
        raise ConfigError("pump.profile", "must be 'gaussian' or 'homogeneous'")
    if cfg["pump"]["omega_mode"] not in OMEGA_MODES:
        raise ConfigError("pump.omega_mode", f"must be one of {OMEGA_MODES}")
    if cfg["potential"]["kind"] not in ("none", "harmonic", "mexican_hat"):
        raise ConfigError("potential.kind", "must be 'none', 'harmonic' or 'mexican_hat'")
    r = cfg["run"]
    if r["initial"] not in ("gaussian", "zero"):
        raise ConfigError("run.initial", "must be 'gaussian' or 'zero'")
    if r["order"] not in ("LKL", "KLK"):
        raise ConfigError("run.order", "must be 'LKL' or 'KLK'")
    for key in ("t_final_ps", "dt_ps"):
        if not r[key] > 0:
            raise ConfigError(f"run.{key}", "must be positive")
    if r["stride"] < 1:
        raise ConfigError("run.stride", "must be >= 1")
    for m in cfg["sweep"]["models"]:
        if m not in KINETIC_MODELS:
            raise ConfigError("sweep.models", f"unknown model {m!r}")
    for a in cfg["sweep"]["a_values_per_um"]:
        if isinstance(a, bool) or not isinstance(a, (int, float)):
            raise ConfigError("sweep.a_values_per_um", f"not a number: {a!r}")


def load(path) -> dict:
    """Read a config file (or ``preset:<name>``) and return the effective config."""
    text = preset_text(str(path)[7:]) if str(path).startswith("preset:") else Path(path).read_text()
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"not valid TOML: {exc}") from exc
    return merge(doc)


def preset_text(name: str) -> str:
    res = resources.files("pfqm") / "presets" / f"{name}.toml"
    if not res.is_file():
        raise ConfigError("<preset>", f"no preset named {name!r}")
    return res.read_text()


def preset_names() -> list:
    root = resources.files("pfqm") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def dumps(cfg: dict) -> str:
    import tomli_w

    return tomli_w.dumps(cfg)


# Builders -----------------------------------------------------------------


def build_grid(cfg) -> Grid:
    g = cfg["grid"]
    try:
        if g["dim"] == 1:
            return Grid(1, g["length_x_um"], g["points_x"])
        return Grid(2, g["length_x_um"], g["points_x"], g["length_y_um"], g["points_y"])
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from exc


def build_cavity(cfg) -> disp.CavityParams:
    c = cfg["cavity"]
    try:
        return disp.CavityParams(
            exciton_energy=c["exciton_energy_mev"],
            cavity_offset=c["cavity_offset_mev"],
            photon_mass=disp.mass_from_electron_masses(c["photon_mass_me"]),
            exciton_mass=disp.mass_from_electron_masses(c["exciton_mass_me"]),
            rabi=c["rabi_mev"],
            exact_cavity=c["exact_cavity"],
        )
    except ValueError as exc:
        raise ConfigError("cavity", str(exc)) from exc


def build_kinetic(cfg, model=None) -> disp.KineticSpec:
    k = cfg["kinetic"]
    model = model or k["model"]
    half = k["prefactor_half"]
    cav = build_cavity(cfg)
    try:
        if model == "curvature":
            return disp.LowerBranchCurvature(cav, half)
        if model == "constant":
            mass = disp.mass_from_electron_masses(k["mass_me"]) if k["mass_me"] > 0 else disp.band_bottom_mass(cav)
            return disp.ConstantMass(mass, half)
        if model == "fractional":
            return disp.FractionalPower(k["s"], k["coefficient_mev_um2s"], half)
        if not k["table_path"]:
            raise ConfigError("kinetic.table_path", "required for the tabulated model")
        data = np.loadtxt(k["table_path"], delimiter=",", ndmin=2)
        return disp.Tabulated(data[:, 0], data[:, 1], half)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError("kinetic", str(exc)) from exc


def pump_wavevector(cfg, a=None):
    if a is None:
        return (cfg["pump"]["k_x_per_um"], cfg["pump"]["k_y_per_um"])
    c = np.sqrt(2.0) / 2.0 * a
    return (c, c)


def build_params(cfg, kinetic=None, k_i=None) -> ModelParams:
    kinetic = kinetic or build_kinetic(cfg)
    m, p, v = cfg["model"], cfg["pump"], cfg["potential"]
    k_i = k_i if k_i is not None else pump_wavevector(cfg)
    if cfg["grid"]["dim"] == 1:
        k_i = (k_i[0],)
    kabs = float(np.hypot(*k_i))
    if p["omega_mode"] == "resonant":
        omega_i = m["omega_mev"] + float(disp.kinetic_prefactor_g(kabs, kinetic)) + p["detuning_mev"]
    elif p["omega_mode"] == "lower_branch":
        cav = build_cavity(cfg)
        lift = float(disp.branch_energies(kabs, cav)[0] - disp.branch_energies(0.0, cav)[0])
        omega_i = m["omega_mev"] + lift + p["detuning_mev"]
    else:
        omega_i = p["omega_i_mev"]
    try:
        if p["profile"] == "gaussian":
            profile = Gaussian(p["amplitude_mev"], p["width_um"], (p["center_x_um"], p["center_y_um"]))
        else:
            profile = Homogeneous(p["amplitude_mev"])
        if v["kind"] == "harmonic":
            potential = Harmonic(v["strength_mev_um2"])
        elif v["kind"] == "mexican_hat":
            potential = MexicanHat(v["strength_mev_um2"], v["hat_amplitude_mev"], v["hat_width_um"])
        else:
            potential = NoPotential()
        return ModelParams(
            kinetic=kinetic,
            alpha=m["alpha_mev_um2"],
            gamma=m["gamma_per_ps"],
            eta=m["eta"],
            omega=m["omega_mev"],
            pump=PumpSpec(profile, tuple(k_i), omega_i),
            potential=potential,
        )
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from exc


def build_initial(cfg, grid: Grid, seed=None) -> SimState:
    """Initial field; ``gaussian`` is ``A exp(-r^2 / w^2)`` (w = 1 um gives exp(-(x^2 + y^2)))."""
    r = cfg["run"]
    if r["initial"] == "zero":
        values = np.zeros(grid.shape, dtype=complex)
    else:
        rad2 = grid.radius() ** 2
        values = r["initial_amplitude"] * np.exp(-rad2 / r["initial_width_um"] ** 2) + 0j
    if r["noise_amplitude"] > 0:
        rng = np.random.default_rng(seed)
        values = values + r["noise_amplitude"] * (
            rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        )
    return SimState(SpectralField(grid, values), 0.0)
