"""Line-oriented run configuration: `key = value` under `[section]` headers.

Sections: [run] (command, seed, threads), [params] (scalar physics
parameters), [grid] (swept variables; values are comma lists or
inclusive ranges `lo:hi:count`), [output] (path, format).  Comments
start with `#`; blank lines are ignored.  Parsing collects every
problem (with line numbers) before failing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

COMMANDS = ("dispersion", "amplitude", "born", "dyson", "trotter",
            "wavepacket", "sweep")

# command -> (required params, optional params with defaults, allowed grids,
#             required grids)
_SCHEMAS = {
    "dispersion": (("nu",), {}, ("k",), ("k",)),
    "amplitude": (("nu", "chi", "p"), {"born_n": 12}, ("k",), ("k",)),
    "born": (("nu", "chi", "p", "k"), {"n_max": 40}, (), ()),
    "dyson": (("nu", "chi", "p", "k"), {"quad_n": 32768}, (), ()),
    "trotter": ((), {"n": 128, "omega_max": 2.0, "mode_index": 32,
                     "eps_ref": 0.2}, ("tau",), ("tau",)),
    "wavepacket": (("nu", "chi", "p", "k0"),
                   {"sigma_x": 64.0, "length": 4096, "t_steps": 900,
                    "snapshot_every": 0, "snapshot_prefix": ""},
                   (), ()),
    "sweep": (("nu", "chi", "p"), {}, ("nu", "chi", "p", "k"), ("k",)),
}

_INT_PARAMS = {"born_n", "n_max", "quad_n", "n", "mode_index", "length",
               "t_steps", "snapshot_every"}
_STR_PARAMS = {"snapshot_prefix"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    grids: dict
    output_path: str
    output_format: str
    seed: int = 0
    threads: int | None = None
    source_lines: dict = field(default_factory=dict, compare=False)


def _loc(lineno: int) -> str:
    """Human label for where a value came from (0 = --set override)."""
    return f"line {lineno}" if lineno else "override"


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_grid_value(text: str, lineno: int, problems: list):
    text = text.strip()
    if not text:
        return []  # an empty grid is legal: zero rows, successful run
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) != 3:
            problems.append(f"{_loc(lineno)}: range syntax is lo:hi:count, "
                            f"got {text!r}")
            return []
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            problems.append(f"{_loc(lineno)}: malformed range {text!r}")
            return []
        if count < 1:
            problems.append(f"{_loc(lineno)}: range count must be >= 1")
            return []
        return [float(v) for v in np.linspace(lo, hi, count)]
    out = []
    for piece in text.split(","):
        v = _parse_scalar(piece)
        if isinstance(v, str):
            problems.append(f"{_loc(lineno)}: grid entry {piece.strip()!r} "
                            f"is not a number")
            return []
        out.append(float(v))
    return out


def _scan(text: str):
    """Raw pass: ({section: {key: (value_text, lineno)}}, problems)."""
    sections: dict = {}
    problems: list = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in ("run", "params", "grid", "output"):
                problems.append(f"line {lineno}: unknown section [{current}]")
                current = None
            else:
                sections.setdefault(current, {})
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected `key = value`, "
                            f"got {line!r}")
            continue
        if current is None:
            problems.append(f"line {lineno}: assignment outside any section")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in sections[current]:
            first = sections[current][key][1]
            problems.append(f"lines {first} and {lineno}: duplicate key "
                            f"{key!r} in [{current}]")
            continue
        sections[current][key] = (value, lineno)
    return sections, problems


_RUN_KEYS = ("command", "seed", "threads")
_OUTPUT_KEYS = ("path", "format")


def _apply_overrides(sections: dict, overrides, problems: list) -> None:
    """Apply `--set key=value` pairs on top of the scanned file.

    A dotted key (`grid.k=0.1,0.2`) names its section explicitly; a bare
    key is routed to [run]/[output] when it is one of their fixed keys,
    to whichever section already defines it, and otherwise by the active
    command's schema (scalar parameter first, grid name second).
    Overrides replace file values instead of tripping the duplicate-key
    check, and carry pseudo line number 0.
    """
    for item in overrides:
        if "=" not in item:
            problems.append(f"override {item!r}: expected key=value")
            continue
        key, value = (part.strip() for part in item.split("=", 1))
        section = None
        if "." in key:
            section, key = (part.strip() for part in key.split(".", 1))
            if section not in ("run", "params", "grid", "output"):
                problems.append(f"override {item!r}: unknown section "
                                f"{section!r}")
                continue
        elif key in _RUN_KEYS:
            section = "run"
        elif key in _OUTPUT_KEYS:
            section = "output"
        else:
            hits = [s for s in ("params", "grid") if key in sections.get(s, {})]
            if len(hits) == 1:
                section = hits[0]
            else:
                command = sections.get("run", {}).get("command", (None,))[0]
                schema = _SCHEMAS.get(command)
                if (schema is not None
                        and key not in set(schema[0]) | set(schema[1])
                        and key in schema[2]):
                    section = "grid"
                else:
                    section = "params"
        sections.setdefault(section, {})[key] = (value, 0)


def _check_physics(params: dict, lines: dict, problems: list):
    def line_of(key):
        n = lines.get(key)
        return "" if n is None else f"{_loc(n)}: "

    nu = params.get("nu")
    if nu is not None and not 0.0 <= float(nu) <= 1.0:
        problems.append(f"{line_of('nu')}nu must lie in [0, 1], got {nu}")
    sigma = params.get("sigma_x")
    if sigma is not None and float(sigma) < 8.0:
        problems.append(f"{line_of('sigma_x')}sigma_x must be >= 8, "
                        f"got {sigma}")
    for key in ("length", "t_steps", "n", "quad_n", "n_max", "born_n"):
        v = params.get(key)
        if v is not None and int(v) <= 0:
            problems.append(f"{line_of(key)}{key} must be positive, got {v}")


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse and fully validate; raises one error listing every problem."""
    sections, problems = _scan(text)
    _apply_overrides(sections, overrides, problems)
    run = sections.get("run", {})
    params_raw = sections.get("params", {})
    grid_raw = sections.get("grid", {})
    output = sections.get("output", {})

    command = None
    if "command" not in run:
        problems.append("missing required key `command` in [run]")
    else:
        command = run["command"][0]
        if command not in COMMANDS:
            problems.append(f"{_loc(run['command'][1])}: unknown command "
                            f"{command!r} (choose from {', '.join(COMMANDS)})")
            command = None

    seed = 0
    if "seed" in run:
        v = _parse_scalar(run["seed"][0])
        if not isinstance(v, int):
            problems.append(f"{_loc(run['seed'][1])}: seed must be an integer")
        else:
            seed = v
    threads = None
    if "threads" in run:
        v = _parse_scalar(run["threads"][0])
        if not isinstance(v, int) or v < 1:
            problems.append(f"{_loc(run['threads'][1])}: threads must be a "
                            f"positive integer")
        else:
            threads = v
    for key in run:
        if key not in ("command", "seed", "threads"):
            problems.append(f"{_loc(run[key][1])}: unknown key {key!r} in [run]")

    out_path = "results.csv"
    out_format = None
    if "path" in output:
        out_path = output["path"][0]
    if "format" in output:
        out_format = output["format"][0]
        if out_format not in ("csv", "json"):
            problems.append(f"{_loc(output['format'][1])}: format must be "
                            f"csv or json, got {out_format!r}")
    else:
        out_format = "json" if out_path.endswith(".json") else "csv"
    for key in output:
        if key not in ("path", "format"):
            problems.append(f"{_loc(output[key][1])}: unknown key {key!r} "
                            f"in [output]")

    params: dict = {}
    lines: dict = {}
    grids: dict = {}
    if command is not None:
        required, optional, allowed_grids, required_grids = _SCHEMAS[command]
        known = set(required) | set(optional)
        for key, (value, lineno) in params_raw.items():
            if key not in known:
                problems.append(f"{_loc(lineno)}: unknown key {key!r} for "
                                f"command {command!r}")
                continue
            v = _parse_scalar(value)
            lines[key] = lineno
            if key in _STR_PARAMS:
                params[key] = str(v)
            elif key in _INT_PARAMS:
                if not isinstance(v, int):
                    problems.append(f"{_loc(lineno)}: {key} must be an "
                                    f"integer, got {value!r}")
                else:
                    params[key] = v
            else:
                if isinstance(v, str):
                    problems.append(f"{_loc(lineno)}: {key} must be a number, "
                                    f"got {value!r}")
                else:
                    params[key] = float(v)
        for key, (value, lineno) in grid_raw.items():
            if key not in allowed_grids:
                problems.append(f"{_loc(lineno)}: {key!r} cannot be swept for "
                                f"command {command!r}")
                continue
            vals = _parse_grid_value(value, lineno, problems)
            grids[key] = vals
        for key in sorted(set(params) & set(grids)):
            problems.append(f"{key!r} is given both as a scalar in [params] "
                            f"and as a grid in [grid]")
        for key in required:
            if key not in params and key not in grids:
                problems.append(f"missing required parameter {key!r} for "
                                f"command {command!r}")
        for key in required_grids:
            if key not in grids:
                problems.append(f"missing required grid {key!r} for "
                                f"command {command!r}")
        for key, default in optional.items():
            params.setdefault(key, default)
        _check_physics(params, lines, problems)

    if problems:
        raise ConfigError(
            "config validation failed:\n  " + "\n  ".join(problems),
            problems=problems,
        )
    return RunConfig(
        command=command,
        params=params,
        grids=grids,
        output_path=out_path,
        output_format=out_format,
        seed=seed,
        threads=threads,
        source_lines=lines,
    )
