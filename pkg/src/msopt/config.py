"""Strict flat key=value experiment configuration.

Sections in brackets, one `key = value` per line, `#` comments. Unknown
sections or keys, duplicate keys, and type errors are rejected with line
numbers. The schema below is the single source for parsing, defaults, and
the per-subcommand help text.
"""

from dataclasses import dataclass, field

from msopt.errors import ConfigError

KINDS = ("generate-data", "train-score", "optimize", "validate", "sample")

_ALL = KINDS


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {
    "str": lambda s: s.strip(),
    "int": lambda s: int(s.strip()),
    "float": lambda s: float(s.strip()),
    "bool": _parse_bool,
    "floats": lambda s: tuple(float(v) for v in s.split(",")),
    "ints": lambda s: tuple(int(v) for v in s.split(",")),
}


@dataclass(frozen=True)
class Key:
    type: str
    kinds: tuple
    default: object = None
    required: bool = False
    help: str = ""


# section -> key name -> Key
SCHEMA = {
    "experiment": {
        "kind": Key("str", _ALL, required=True, help="one of " + "|".join(KINDS)),
        "seed": Key("int", _ALL, default=0, help="master seed for all named random streams"),
    },
    "oracle": {
        "kind": Key("str", ("optimize", "validate"),
                    help="empirical | quadrature | exact | mlp"),
        "sigma": Key("float", ("optimize", "validate"), default=0.05,
                     help="noise scale of the score oracle"),
        "dataset": Key("str", ("optimize", "validate", "train-score"),
                       help="points CSV or trajectory dataset directory"),
        "sample_count": Key("int", ("optimize", "validate"),
                            help="sample this many manifold points as the oracle dataset"),
        "node_count": Key("int", ("optimize", "validate"), default=4096,
                          help="quadrature nodes (circle oracle)"),
        "model": Key("str", ("optimize", "validate", "sample"),
                     help="trained score network file"),
    },
    "manifold": {
        "kind": Key("str", ("generate-data", "optimize", "validate"),
                    help="circle | sphere | orthogonal | unicycle | double_pendulum"),
        "radius": Key("float", ("generate-data", "optimize", "validate"), default=1.0),
        "dim": Key("int", ("generate-data", "optimize", "validate"), default=3,
                   help="ambient dimension (sphere)"),
        "n": Key("int", ("generate-data", "optimize", "validate"), default=3,
                 help="matrix size (orthogonal group)"),
        "horizon": Key("int", ("generate-data", "optimize"), default=20,
                       help="trajectory horizon (systems)"),
        "count": Key("int", ("generate-data",), default=1000,
                     help="points or trajectories to generate"),
        "dt": Key("float", ("generate-data", "optimize"),
                  help="discretization step override (systems)"),
    },
    "objective": {
        "kind": Key("str", ("optimize",),
                    help="linear | brockett | tracking | zero"),
        "a": Key("floats", ("optimize",), help="coefficients of the linear objective"),
        "a_seed": Key("int", ("optimize",), default=0,
                      help="seed for the random symmetric Brockett matrix"),
        "reference": Key("str", ("optimize",), default="arc",
                         help="sinusoid | arc | figure_eight | CSV path"),
        "amplitude": Key("float", ("optimize",), default=1.0),
        "q_weight": Key("floats", ("optimize",),
                        help="diagonal of Q (tracking); default per system"),
        "r_weight": Key("floats", ("optimize",),
                        help="diagonal of R (tracking); default per system"),
    },
    "algorithm": {
        "kind": Key("str", ("optimize",),
                    help="dlf | drgd | landing_descent | riemannian_gd"),
        "eta": Key("float", ("optimize", "validate"), default=3e3, help="landing gain"),
        "t_step": Key("float", ("optimize",), default=1e-4, help="Euler step (dlf)"),
        "gamma": Key("float", ("optimize",), default=1e-3, help="step size"),
        "max_steps": Key("int", ("optimize",), default=1000),
        "stop_grad_tol": Key("float", ("optimize",), default=1e-8),
        "record_every": Key("int", ("optimize", "validate"), default=1),
        "x0": Key("str", ("optimize",), default="auto",
                  help="auto | dataset_argmin | sample | comma-separated floats"),
        "check": Key("str", ("validate",), help="rate | landing | report"),
        "sigmas": Key("floats", ("validate",), default=(0.2, 0.1, 0.05, 0.025, 0.0125)),
        "offsets": Key("floats", ("validate",), default=(0.3,),
                       help="tube offsets as fractions of the safe tube radius"),
        "n_points": Key("int", ("validate",), default=100),
        "x0_distance": Key("float", ("validate",), default=0.3,
                           help="start distance for the landing check"),
        "t_end": Key("float", ("validate",), default=3.0),
        "euler_step": Key("float", ("validate",), default=1e-4),
        "slope_min": Key("float", ("validate",), default=0.7),
        "slope_max": Key("float", ("validate",), default=1.4),
        "max_rel_dev": Key("float", ("validate",), default=0.05),
        "run_csv": Key("str", ("validate",), help="run record CSV (report check)"),
        "run_meta": Key("str", ("validate",), help="run metadata sidecar (report check)"),
        "epochs": Key("int", ("train-score",), default=4000),
        "batch": Key("int", ("train-score",), default=128),
        "hidden": Key("ints", ("train-score",), default=(128, 128, 128)),
        "t_max": Key("float", ("train-score", "sample"), default=3.0),
        "t_min": Key("float", ("train-score", "sample"), default=1e-4),
        "lr_hi": Key("float", ("train-score",), default=1e-3),
        "lr_lo": Key("float", ("train-score",), default=5e-5),
        "count": Key("int", ("sample",), default=1000, help="samples to draw"),
        "steps": Key("int", ("sample",), default=800, help="reverse SDE steps"),
    },
    "output": {
        "dir": Key("str", _ALL, default="out", help="artifact directory"),
    },
}

_REQUIRED = {
    "generate-data": (("manifold", "kind"), ("manifold", "count")),
    "train-score": (("oracle", "dataset"), ("algorithm", "epochs")),
    "optimize": (("oracle", "kind"), ("objective", "kind"), ("algorithm", "kind")),
    "validate": (("algorithm", "check"),),
    "sample": (("oracle", "model"),),
}

_SECTION_ORDER = ("experiment", "oracle", "manifold", "objective", "algorithm", "output")


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    values: dict = field(default_factory=dict)

    def get(self, section, key):
        if (section, key) in self.values:
            return self.values[(section, key)]
        spec = SCHEMA[section][key]
        return spec.default

    def has(self, section, key) -> bool:
        return (section, key) in self.values

    def echo(self) -> str:
        """Canonical config text; reloads to an identical ExperimentConfig."""
        lines = []
        for section in _SECTION_ORDER:
            keys = sorted(k for (s, k) in self.values if s == section)
            if not keys:
                continue
            lines.append(f"[{section}]")
            for key in keys:
                lines.append(f"{key} = {_render(self.values[(section, key)])}")
            lines.append("")
        return "\n".join(lines)


def _render(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def parse_config_text(text, source="<config>") -> ExperimentConfig:
    values = {}
    seen_lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if section is None:
            raise ConfigError(f"{source}:{lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in SCHEMA[section]:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} in [{section}]")
        if (section, key) in values:
            first = seen_lines[(section, key)]
            raise ConfigError(
                f"{source}:{lineno}: duplicate key {key!r} in [{section}] "
                f"(first set at line {first})"
            )
        spec = SCHEMA[section][key]
        try:
            parsed = _PARSERS[spec.type](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
        values[(section, key)] = parsed
        seen_lines[(section, key)] = lineno

    kind = values.get(("experiment", "kind"))
    if kind is None:
        raise ConfigError(f"{source}: missing required key 'kind' in [experiment]")
    if kind not in KINDS:
        raise ConfigError(f"{source}: unknown experiment kind {kind!r}")

    for (section, key) in values:
        if key == "kind" and section == "experiment":
            continue
        if kind not in SCHEMA[section][key].kinds:
            raise ConfigError(
                f"{source}: key {key!r} in [{section}] is not used by "
                f"experiment kind {kind!r}"
            )
    missing = [
        f"[{s}] {k}" for (s, k) in _REQUIRED[kind] if (s, k) not in values
    ]
    if missing:
        raise ConfigError(
            f"{source}: experiment kind {kind!r} requires keys: " + ", ".join(missing)
        )
    seed = values.get(("experiment", "seed"), SCHEMA["experiment"]["seed"].default)
    return ExperimentConfig(kind=kind, seed=seed, values=values)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def describe_keys(kind: str) -> str:
    """Accepted config keys for a subcommand, generated from the schema."""
    lines = []
    for section in _SECTION_ORDER:
        rows = []
        for key, spec in SCHEMA[section].items():
            if kind not in spec.kinds:
                continue
            extra = []
            if spec.required or (section, key) in _REQUIRED.get(kind, ()):
                extra.append("required")
            elif spec.default is not None:
                extra.append(f"default {_render(spec.default)}")
            suffix = f" ({'; '.join(extra)})" if extra else ""
            text = f"  {key} <{spec.type}>{suffix}"
            if spec.help:
                text += f": {spec.help}"
            rows.append(text)
        if rows:
            lines.append(f"[{section}]")
            lines.extend(rows)
    return "\n".join(lines)
