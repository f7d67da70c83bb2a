"""Experiment configuration: YAML text to a validated, normalized record."""
import copy
from dataclasses import dataclass
import hashlib
import json
import math

import yaml

KINDS = ("tail", "reflection", "reflection-alpha", "scaling", "goldie", "tauberian",
         "diagnostics", "moments")
F_KINDS = ("zero", "constant", "cosine", "gaussian-bump", "tabulated")

DEFAULTS = {
    "kernel": {"d": 1, "f": {"kind": "zero"}, "epsilon": None, "domain": None},
    "grid": {"points_per_axis": 256},
    "gmc": {"gamma": 1.0, "g": 1.0, "region": None, "v": None, "r": 0.25, "c": 0.5, "alpha": None},
    "mc": {"n": 10_000, "seed": 0, "workers": None},
    "output": {"directory": "results", "formats": ["csv", "json"]},
    "estimator": {},
}

# blocks that cannot change numerical output
_UNHASHED = ("output",)


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists (field path, message) pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.violations))


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    @property
    def kind(self):
        return self.data["experiment"]

    @property
    def seed(self):
        return self.data["mc"]["seed"]

    def __getitem__(self, key):
        return self.data[key]

    @property
    def hash(self):
        return config_hash(self.data)

    def to_yaml(self):
        return yaml.safe_dump(self.data, sort_keys=True)

    def with_overrides(self, seed=None, workers=None, out=None, formats=None, n=None):
        data = copy.deepcopy(self.data)
        if seed is not None:
            data["mc"]["seed"] = int(seed)
        if workers is not None:
            data["mc"]["workers"] = int(workers)
        if n is not None:
            data["mc"]["n"] = int(n)
        if out is not None:
            data["output"]["directory"] = str(out)
        if formats is not None:
            data["output"]["formats"] = list(formats)
        return validate_config(data)


def config_hash(data):
    hashed = {k: v for k, v in data.items() if k not in _UNHASHED}
    hashed["mc"] = {k: v for k, v in hashed["mc"].items() if k != "workers"}
    text = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, val in (given or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "f":
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def validate_config(raw):
    """Parse YAML text (or a mapping) into an ExperimentConfig.

    Missing values take defaults (the seed defaults to 0); every violation is
    collected with its field path before raising ConfigError.
    """
    if isinstance(raw, str):
        try:
            raw = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError([("<text>", f"not parseable: {exc}")]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "config must be a mapping")])
    errors = []
    unknown = set(raw) - set(DEFAULTS) - {"experiment"}
    for key in sorted(unknown):
        errors.append((key, "unknown block"))
    kind = raw.get("experiment")
    if kind not in KINDS:
        errors.append(("experiment", f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}"))
    data = {"experiment": kind}
    for block, dflt in DEFAULTS.items():
        given = raw.get(block)
        if given is not None and not isinstance(given, dict):
            errors.append((block, "must be a mapping"))
            given = None
        data[block] = _merge(dflt, given)
    if isinstance(data["kernel"]["f"], (int, float)):
        data["kernel"]["f"] = {"kind": "constant", "L": float(data["kernel"]["f"])}

    k, gm, mc = data["kernel"], data["gmc"], data["mc"]
    d = k.get("d")
    if d not in (1, 2, 3):
        errors.append(("kernel.d", f"dimension must be 1, 2 or 3, got {d!r}"))
        d = 1
    f = k.get("f") or {}
    if f.get("kind") not in F_KINDS:
        errors.append(("kernel.f.kind", f"unknown f kind {f.get('kind')!r}; expected one of {', '.join(F_KINDS)}"))
    elif f["kind"] == "constant" and not isinstance(f.get("L"), (int, float)):
        errors.append(("kernel.f.L", "constant f needs a numeric L"))
    elif f["kind"] == "tabulated" and not f.get("path"):
        errors.append(("kernel.f.path", "tabulated f needs a matrix file path"))
    eps = k.get("epsilon")
    if eps is not None and not (isinstance(eps, (int, float)) and eps > 0):
        errors.append(("kernel.epsilon", "epsilon must be positive or null (half the grid spacing)"))

    ppa = data["grid"].get("points_per_axis")
    if not (isinstance(ppa, int) and ppa >= 2):
        errors.append(("grid.points_per_axis", "must be an integer >= 2"))

    gamma = gm.get("gamma")
    if not isinstance(gamma, (int, float)):
        errors.append(("gmc.gamma", "gamma must be a number"))
        gamma = None
    elif not 0 < gamma < math.sqrt(2 * d):
        errors.append(("gmc.gamma",
                       f"subcritical only: gamma must lie in (0, sqrt(2d)) = (0, {math.sqrt(2 * d):.6g}); "
                       f"got {gamma} (supercritical/critical gamma is not supported)"))
        gamma = None
    alpha = gm.get("alpha")
    if kind == "reflection-alpha" and alpha is None:
        errors.append(("gmc.alpha", "reflection-alpha needs alpha"))
    if alpha is not None and gamma is not None:
        lo, hi = gamma / 2, gamma / 2 + d / gamma
        if not (isinstance(alpha, (int, float)) and lo < alpha < hi):
            errors.append(("gmc.alpha", f"alpha must lie in (gamma/2, Q) = ({lo:.6g}, {hi:.6g}), got {alpha}"))
    cs = gm.get("c")
    for c in (cs if isinstance(cs, list) else [cs]):
        if c is not None and not (isinstance(c, (int, float)) and 0 < c < 1):
            errors.append(("gmc.c", f"c must lie in (0, 1), got {c!r}"))
    r = gm.get("r")
    if not (isinstance(r, (int, float)) and r > 0):
        errors.append(("gmc.r", "radius must be positive"))

    n = mc.get("n")
    if not (isinstance(n, int) and n >= 1):
        errors.append(("mc.n", "n must be an integer >= 1"))
    seed = mc.get("seed")
    if seed is None:
        mc["seed"] = 0
    elif not (isinstance(seed, int) and 0 <= seed < 2**128):
        errors.append(("mc.seed", "seed must be a non-negative integer"))
    w = mc.get("workers")
    if w is not None and not (isinstance(w, int) and w >= 1):
        errors.append(("mc.workers", "workers must be a positive integer"))

    fmts = data["output"].get("formats")
    if isinstance(fmts, str):
        fmts = data["output"]["formats"] = [fmts]
    if not fmts or any(x not in ("csv", "json") for x in fmts):
        errors.append(("output.formats", "formats must be a subset of [csv, json]"))

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(data)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return validate_config(fh.read())


def default_config(kind):
    raw = {"experiment": kind}
    if kind == "reflection-alpha":
        gamma, d = DEFAULTS["gmc"]["gamma"], DEFAULTS["kernel"]["d"]
        # midpoint of the admissible range (gamma/2, Q)
        raw["gmc"] = {"alpha": 0.5 * (gamma / 2 + gamma / 2 + d / gamma)}
    return validate_config(raw)
