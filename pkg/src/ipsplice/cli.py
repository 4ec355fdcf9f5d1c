"""
Command-line front end.

    ipsplice SUBCOMMAND --config FILE [--out DIR] [--workers N] [--set key=value ...]

Subcommands: invade, crossings, arms, corrlen, splice, verify.

The config file is INI-style (a ``[subcommand]`` section of ``key = value``
lines) or JSON (either ``{"subcommand": {...}}`` or a flat object).  Lists are
comma separated; fractions such as ``1/8`` are accepted wherever a float is.

Output directory: ``--out``, else ``$IPSPLICE_OUTPUT_DIR``, else the
``output`` key, else ``runs/<subcommand>-<config hash>``.

Exit status: 0 on success, 1 on a configuration or domain error, 2 when a
``verify`` check fails.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import default_workers
from .errors import DomainError

ENV_OUTPUT = "IPSPLICE_OUTPUT_DIR"
SUBCOMMANDS = ("invade", "crossings", "arms", "corrlen", "splice", "verify")
REQUIRED = object()


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# value parsers

def _float(v) -> float:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    s = str(v).strip()
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {s!r}") from None


def _int(v) -> int:
    if isinstance(v, bool):
        raise ValueError("expected an integer")
    if isinstance(v, int):
        return v
    s = str(v).strip()
    if not re.fullmatch(r"[+-]?\d+", s):
        raise ValueError(f"not an integer: {s!r}")
    return int(s)


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _list(item):
    def parse(v):
        if isinstance(v, (list, tuple)):
            parts = list(v)
        else:
            parts = [p for p in str(v).replace(";", ",").split(",") if p.strip()]
        if not parts:
            raise ValueError("empty list")
        return [item(p) for p in parts]

    return parse


def _choice(*options):
    def parse(v):
        s = str(v).strip().lower()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {v!r}")
        return s

    return parse


def _opt(parser):
    def parse(v):
        if v is None or str(v).strip().lower() in ("", "none"):
            return None
        return parser(v)

    return parse


def _budget(v):
    s = str(v).strip().lower()
    if s in ("none", ""):
        return "none"
    m = re.fullmatch(r"(per_arm|total)\s*:\s*(\d+)", s)
    if not m:
        raise ValueError("budget must be none, per_arm:K or total:M")
    return f"{m.group(1)}:{int(m.group(2))}"


def _mpolicy(v):
    s = str(v).strip().lower()
    if s == "mode":
        return "mode"
    return str(_int(s))


_modes = _list(_choice("threshold", "invasion"))

SCHEMA = {
    "invade": {
        "seed": (_int, 0),
        "max_steps": (_opt(_int), None),
        "exit_radius": (_opt(_int), None),
        "box": (_opt(_int), None),
        "runs": (_int, 1),
        "tail_fraction": (_float, 0.1),
        "write_steps": (_opt(_bool), None),
    },
    "crossings": {
        "n": (_list(_int), REQUIRED),
        "p": (_float, 0.5),
        "samples": (_int, 100),
        "seed": (_int, 0),
        "source": (_choice("threshold", "invasion"), "threshold"),
        "reach_factor": (_int, 4),
        "M_cap": (_int, 30),
        "check_dual": (_bool, True),
    },
    "arms": {
        "n": (_int, REQUIRED),
        "s": (_list(_int), REQUIRED),
        "p": (_float, 0.5),
        "q": (_float, 0.5),
        "samples": (_int, 1000),
        "seed": (_int, 0),
        "budget": (_budget, "none"),
        "rotations": (_int, 8),
        "center": (_list(_int), [0, 0]),
    },
    "corrlen": {
        "p": (_list(_float), REQUIRED),
        "n": (_list(_int), REQUIRED),
        "delta": (_float, 0.1),
        "samples": (_int, 1000),
        "seed": (_int, 0),
        "pn_scales": (_opt(_list(_int)), None),
        "pn_samples": (_opt(_int), None),
        "tol": (_float, 1e-3),
    },
    "splice": {
        "n": (_list(_int), REQUIRED),
        "eps": (_list(_float), REQUIRED),
        "modes": (_modes, ["threshold"]),
        "samples": (_int, 1000),
        "seed": (_int, 0),
        "M_cap": (_int, 30),
        "reach_factor": (_int, 4),
        "tail_threshold": (_int, 20),
        "tail_level": (_float, 0.01),
        "cv_outer": (_int, 0),
        "cv_inner": (_int, 20),
        "cv_eps": (_opt(_float), None),
        "deltas": (_list(_float), [0.1, 0.2]),
        "M_policy": (_mpolicy, "mode"),
        "pilot_samples": (_int, 0),
        "a_samples": (_int, 0),
        "l": (_int, 4),
        "delta": (_float, 0.1),
        "pn_samples": (_int, 2000),
        "a_p": (_opt(_float), None),
    },
    "verify": {
        "seed": (_int, 0),
        "configs": (_int, 200),
        "flip_budget_random": (_int, 2000),
        "fixture": (_bool, True),
        "arm_checks": (_int, 100),
        "invasion_checks": (_int, 3),
        "invasion_steps": (_int, 2000),
        "rect_samples": (_int, 20000),
    },
}

# extra keys accepted everywhere
COMMON = {"output": (_opt(str), None)}


def _validate(sub: str, p: dict) -> list[tuple[str, str]]:
    """(key, problem) pairs for values outside the operations' domains."""
    bad = []

    def need(key, ok, msg):
        if key in p and p[key] is not None and not ok(p[key]):
            bad.append((key, msg))

    for key in ("samples", "runs", "rotations", "reach_factor", "M_cap", "l"):
        need(key, lambda v: v >= 1, "must be at least 1")
    for key in ("p", "q"):
        if sub in ("crossings", "arms"):
            need(key, lambda v: 0.0 <= v <= 1.0, "must lie in [0, 1]")
    if sub == "invade":
        if p["max_steps"] is None and p["exit_radius"] is None:
            bad.append(("max_steps", "invade needs max_steps or exit_radius"))
        need("max_steps", lambda v: v >= 0, "must be nonnegative")
        need("exit_radius", lambda v: v >= 1, "must be at least 1")
        need("box", lambda v: v >= 1, "must be at least 1")
        need("tail_fraction", lambda v: 0.0 < v <= 1.0, "must lie in (0, 1]")
    if sub == "crossings":
        need("n", lambda v: all(x >= 2 for x in v), "scales must be at least 2")
    if sub == "arms":
        need("s", lambda v: all(1 <= x < p["n"] for x in v), "inner scales must satisfy 1 <= s < n")
        need("center", lambda v: len(v) == 2, "center must be two integers")
    if sub == "corrlen":
        need("p", lambda v: all(0.5 < x <= 1.0 for x in v), "p must lie in (1/2, 1]")
        need("delta", lambda v: 0.0 < v < 1.0, "must lie in (0, 1)")
        need("n", lambda v: all(x >= 1 for x in v), "scales must be positive")
        need("pn_scales", lambda v: all(x >= 2 for x in v), "scales must be at least 2")
        need("tol", lambda v: v > 0, "must be positive")
    if sub == "splice":
        need("n", lambda v: all(x >= 8 for x in v), "scales must be at least 8")
        need("eps", lambda v: all(0.0 <= x <= 1.0 for x in v), "eps must lie in [0, 1]")
        need("cv_inner", lambda v: v >= 2, "must be at least 2")
        need("cv_outer", lambda v: v == 0 or v >= 2, "must be 0 (skip) or at least 2")
        need("deltas", lambda v: all(0.0 < x <= 0.5 for x in v), "deltas must lie in (0, 1/2]")
        need("delta", lambda v: 0.0 < v < 1.0, "must lie in (0, 1)")
        need("a_p", lambda v: 0.0 <= v <= 1.0, "must lie in [0, 1]")
        need("tail_level", lambda v: 0.0 < v < 1.0, "must lie in (0, 1)")
    return bad


# ---------------------------------------------------------------------------
# config loading

def _line_of(text: str, key: str, section: str | None) -> int:
    lines = text.splitlines()
    start = 0
    if section is not None:
        for i, ln in enumerate(lines):
            if ln.strip().lower() == f"[{section}]":
                start = i
                break
    pat = re.compile(rf'^\s*"?{re.escape(key)}"?\s*[=:]', re.IGNORECASE)
    for i in range(start, len(lines)):
        if pat.search(lines[i]):
            return i + 1
    return start + 1


def load_config(path: Path, sub: str, overrides=()) -> tuple[dict, str]:
    """Parsed and validated parameters, plus the verbatim file text."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}:0: cannot read config: {exc.strerror}") from None
    section = None
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: malformed JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}:1: top level must be an object")
        raw = data.get(sub, data) if isinstance(data.get(sub), dict) else data
        raw = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    else:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            line = getattr(exc, "lineno", 0) or 0
            raise ConfigError(f"{path}:{line}: malformed config: {exc.message.splitlines()[0]}") from None
        if not cp.has_section(sub):
            raise ConfigError(f"{path}:1: missing section [{sub}]")
        section = sub
        raw = dict(cp.items(sub))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    schema = {**SCHEMA[sub], **COMMON}
    params = {}
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{path}:{_line_of(text, key, section)}: unknown field '{key}' for {sub}")
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                params[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{path}:{_line_of(text, key, section)}: field '{key}': {exc}") from None
        elif default is REQUIRED:
            anchor = _line_of(text, f"[{sub}]", None) if section else 1
            raise ConfigError(f"{path}:{anchor}: missing required field '{key}' for {sub}")
        else:
            params[key] = default
    for key, msg in _validate(sub, params):
        raise ConfigError(f"{path}:{_line_of(text, key, section)}: field '{key}': {msg}")
    return params, text


def config_hash(sub: str, params: dict) -> str:
    core = {k: v for k, v in params.items() if k != "output"}
    blob = json.dumps({"subcommand": sub, "params": core}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# output helpers

class Writer:
    """Single owner of a run directory; stamps every file with provenance."""

    def __init__(self, out: Path, sub: str, chash: str):
        self.out = out
        self.sub = sub
        self.chash = chash
        out.mkdir(parents=True, exist_ok=True)

    @property
    def stamp(self) -> str:
        return f"# ipsplice {__version__} config_hash={self.chash}"

    def csv(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        buf.write(self.stamp + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        path = self.out / name
        path.write_text(buf.getvalue())
        return path

    def table(self, name: str, header, rows) -> Path:
        lines = [self.stamp, "# " + " ".join(header)]
        lines += [" ".join(_fmt(x) for x in r) for r in rows]
        path = self.out / name
        path.write_text("\n".join(lines) + "\n")
        return path

    def json(self, name: str, payload: dict) -> Path:
        doc = {"version": __version__, "config_hash": self.chash, "subcommand": self.sub, **payload}
        path = self.out / name
        path.write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")
        return path


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        return f if math.isfinite(f) else None
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _est(e) -> dict:
    return {
        "estimate": e.estimate, "stderr": e.stderr, "samples": e.samples, "method": e.method,
        "seed": e.seed, "lower": e.lower, "upper": e.upper, "successes": e.successes,
    }


# ---------------------------------------------------------------------------
# plot data

def emit_plot_data(results, out_dir=None, chash: str | None = None) -> dict:
    """Gnuplot-ready whitespace tables from a run summary.

    ``results`` is a summary dict or a run directory containing
    ``summary.json``.  Writes ``mismatch.dat`` (columns n eps mode estimate
    stderr, sorted by n then eps), ``arm_loglog.dat`` (n s log(s/n)
    log(estimate) stderr of the log) and ``n_histogram.dat`` (n mode N count).
    Missing results give header-only tables.
    """
    if not isinstance(results, dict):
        run = Path(results)
        results = json.loads((run / "summary.json").read_text())
        out_dir = run if out_dir is None else out_dir
    out = Path(out_dir)
    w = Writer(out, results.get("subcommand", "?"), chash or results.get("config_hash", "?"))
    cells = sorted(results.get("cells", []), key=lambda c: (c["n"], c["eps"], c["mode"]))
    paths = {
        "mismatch": w.table(
            "mismatch.dat", ["n", "eps", "mode", "estimate", "stderr"],
            [(c["n"], c["eps"], c["mode"], c["estimate"], c["stderr"]) for c in cells],
        )
    }
    arms = sorted(results.get("arms", []), key=lambda a: (a["n"], a["s"]))
    rows = []
    for a in arms:
        est = a["estimate"]
        rows.append((a["n"], a["s"], math.log(a["s"] / a["n"]),
                     math.log(est) if est > 0 else float("nan"),
                     a["stderr"] / est if est > 0 else float("nan")))
    paths["arm_loglog"] = w.table("arm_loglog.dat", ["n", "s", "log_s_over_n", "log_estimate", "stderr_log"], rows)
    hist = sorted(results.get("histograms", []), key=lambda h: (h["n"], h["mode"]))
    rows = [(h["n"], h["mode"], k, c) for h in hist for k, c in enumerate(h["counts"])]
    paths["n_histogram"] = w.table("n_histogram.dat", ["n", "mode", "N", "count"], rows)
    return paths


# ---------------------------------------------------------------------------
# subcommands

def _run_invade(p, w: Writer, workers: int) -> dict:
    from .invasion import StopRule, invade, invaded_weight_tail, write_invasion_csv
    from .rng import derive_seed
    from .weights import sample_box

    rule = StopRule(p["max_steps"], p["exit_radius"])
    box = p["box"] or ((p["exit_radius"] + 1) if p["exit_radius"] else 1024)
    write_steps = p["write_steps"] if p["write_steps"] is not None else p["runs"] == 1
    rows = []
    for k in range(p["runs"]):
        s = derive_seed(p["seed"], k)
        res = invade(sample_box(box, s), rule)
        tail = invaded_weight_tail(res, p["tail_fraction"]) if len(res) else float("nan")
        rows.append((k, s, len(res), res.stop_reason.value, res.truncated, res.max_distance(), tail))
        if write_steps:
            tmp = w.out / f"invasion_{k}.csv.tmp"
            write_invasion_csv(res, tmp)
            body = tmp.read_text()
            tmp.unlink()
            (w.out / f"invasion_{k}.csv").write_text(w.stamp + "\n" + body)
    w.csv("runs.csv", ["run", "seed", "steps", "stop_reason", "truncated", "max_distance", "tail_max_weight"], rows)
    tails = [r[6] for r in rows if not math.isnan(r[6])]
    return {
        "runs": [dict(zip(["run", "seed", "steps", "stop_reason", "truncated", "max_distance", "tail_max_weight"], r)) for r in rows],
        "tail_fraction": p["tail_fraction"],
        "tail_in_half_to_0.6": sum(0.5 <= t <= 0.6 for t in tails),
    }


def _run_crossings(p, w: Writer, workers: int) -> dict:
    from .crossings import count_disjoint_crossings, min_defect_circuit
    from .lattice import AnnulusSpec
    from .rng import derive_seed
    from .splicing import derive_configuration
    from .weights import Configuration, sample_box, threshold_config

    rows = []
    hists = []
    agree = True
    for n in p["n"]:
        ann = AnnulusSpec.half(n)
        counts = []
        for k in range(p["samples"]):
            s = derive_seed(p["seed"], n, k)
            if p["source"] == "threshold":
                wf = sample_box(n, s)
                c = threshold_config(wf, p["p"])
            else:
                wf = sample_box(p["reach_factor"] * n, s)
                c = derive_configuration(wf, n, "invasion", p["reach_factor"])
            N = count_disjoint_crossings(c, ann, witness=False).value
            d = min_defect_circuit(c, ann).defect_count if p["check_dual"] else None
            agree = agree and (d is None or d == N)
            counts.append(N)
            rows.append((n, k, N, "" if d is None else d))
        h = np.bincount(np.minimum(counts, p["M_cap"]), minlength=p["M_cap"] + 1)
        hists.append({"n": n, "mode": p["source"], "counts": h.tolist()})
    w.csv("crossings.csv", ["n", "sample", "N", "defects"], rows)
    w.csv("histogram.csv", ["n", "mode", "N", "count"],
          [(h["n"], h["mode"], k, c) for h in hists for k, c in enumerate(h["counts"])])
    return {"histograms": hists, "checks": {"maxflow_equals_dual": agree}}


def _parse_budget(s: str):
    from .arms import PerArm, Total

    if s == "none":
        return None
    kind, v = s.split(":")
    return PerArm(int(v)) if kind == "per_arm" else Total(int(v))


def loglog_slope(ss, n, ests) -> dict:
    """Weighted least-squares slope of log(estimate) against log(s/n)."""
    pts = [(math.log(s / n), math.log(e.estimate), e.stderr / e.estimate) for s, e in zip(ss, ests) if e.estimate > 0]
    if len(pts) < 2:
        return {"slope": None, "stderr": None, "lower95": None, "upper95": None, "points": len(pts)}
    x = np.array([a for a, _, _ in pts])
    y = np.array([b for _, b, _ in pts])
    wt = 1.0 / np.array([c for _, _, c in pts]) ** 2
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (wt[:, None] * X)
    beta = np.linalg.solve(A, X.T @ (wt * y))
    cov = np.linalg.inv(A)
    se = float(math.sqrt(cov[1, 1]))
    return {"slope": float(beta[1]), "stderr": se, "lower95": float(beta[1] - 1.959963984540054 * se),
            "upper95": float(beta[1] + 1.959963984540054 * se), "points": len(pts)}


def _run_arms(p, w: Writer, workers: int) -> dict:
    from .arms import ArmEventSpec, estimate_arm_probability
    from .rng import derive_seed

    budget = _parse_budget(p["budget"])
    ests = []
    specs = []
    for s in sorted(p["s"]):
        spec = ArmEventSpec(p["p"], p["q"], s, p["n"], tuple(p["center"]), budget, p["rotations"])
        e = estimate_arm_probability(spec, p["samples"], derive_seed(p["seed"], s), workers)
        specs.append(spec)
        ests.append(e)
    w.csv("arms.csv", ["p", "q", "budget", "center_x", "center_y", "n", "s", "estimate", "stderr", "samples", "seed"],
          [(sp.p, sp.q, sp.label(), sp.center[0], sp.center[1], sp.n, sp.s, e.estimate, e.stderr, e.samples, e.seed)
           for sp, e in zip(specs, ests)])
    fit = loglog_slope([sp.s for sp in specs], p["n"], ests)
    return {
        "arms": [{"n": sp.n, "s": sp.s, **_est(e)} for sp, e in zip(specs, ests)],
        "loglog_fit": fit,
        "lower_bound_detection": budget is not None and not specs[0].exact,
    }


def _run_corrlen(p, w: Writer, workers: int) -> dict:
    from .arms import estimate_correlation_length, estimate_p_n

    out = []
    rows = []
    for pp in sorted(p["p"]):
        est = estimate_correlation_length(pp, p["delta"], p["n"], p["samples"], p["seed"], workers)
        out.append({"p": pp, "delta": p["delta"], "L": est.L,
                    "curve": [{"n": n, **_est(e)} for n, e in zip(est.scales, est.curve)]})
        rows += [(pp, p["delta"], n, e.estimate, e.stderr, e.lower, e.samples, e.seed) for n, e in zip(est.scales, est.curve)]
    w.csv("corrlen.csv", ["p", "delta", "n", "estimate", "stderr", "lower", "samples", "seed"], rows)
    result = {"correlation_length": out}
    if p["pn_scales"]:
        ns = sorted(p["pn_scales"])
        vals = [estimate_p_n(n, p["delta"], p["pn_samples"] or p["samples"], p["seed"], p["tol"], workers) for n in ns]
        w.csv("pn.csv", ["n", "delta", "p_n", "tol"], [(n, p["delta"], v, p["tol"]) for n, v in zip(ns, vals)])
        result["p_n"] = [{"n": n, "p_n": v} for n, v in zip(ns, vals)]
    return result


def _cached_pn(w: Writer, n: int, l: int, delta: float, samples: int, seed: int, workers: int) -> float:
    from .arms import estimate_p_n

    path = w.out / "pn_cache.json"
    doc = json.loads(path.read_text()) if path.exists() else {}
    cache = doc.get("p_n", {})
    key = f"n={n};l={l};delta={delta!r};samples={samples};seed={seed}"
    if key not in cache:
        scale = max(2, n // l)
        cache[key] = estimate_p_n(scale, delta, samples, seed, 1e-3, workers)
        doc = {"version": __version__, "config_hash": w.chash, "p_n": cache}
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return cache[key]


def _run_splice(p, w: Writer, workers: int) -> dict:
    from .splicing import a_event_stability, estimate_conditional_variance, estimate_mismatch

    cells = []
    hists = []
    checks = {}
    outside = []
    flags = {}
    eps_sorted = sorted(p["eps"], reverse=True)
    for n in sorted(p["n"]):
        for mode in p["modes"]:
            r = estimate_mismatch(n, eps_sorted, p["M_cap"], p["samples"], p["seed"], mode, p["reach_factor"], workers)
            for e, est, fl in zip(r.eps, r.estimates, r.tranche_flags):
                cells.append({"n": n, "eps": e, "mode": mode, **_est(est)})
                flags[f"n={n};eps={e!r}"] = fl
            if r.outside is not None:
                outside += [{"n": n, "eps": e, "mode": mode, **_est(o)} for e, o in zip(r.eps, r.outside)]
            hists.append({"n": n, "mode": mode, "counts": r.histogram.tolist(), "M_cap": p["M_cap"]})
            ok = all(
                b.estimate <= a.estimate + 2 * math.hypot(a.stderr, b.stderr)
                for a, b in zip(r.estimates, r.estimates[1:])
            )
            checks[f"nonincreasing_in_eps[n={n},mode={mode}]"] = ok
            h = r.histogram
            tail = float(h[p["tail_threshold"] + 1 :].sum() / h.sum()) if p["tail_threshold"] < p["M_cap"] else None
            checks[f"tail_N_gt_{p['tail_threshold']}_below_{p['tail_level']}[n={n},mode={mode}]"] = (
                tail is not None and tail < p["tail_level"]
            )
    cells.sort(key=lambda c: (c["n"], c["eps"], c["mode"]))
    w.csv("cells.csv", ["n", "epsilon", "mode", "estimate", "stderr", "samples"],
          [(c["n"], c["eps"], c["mode"], c["estimate"], c["stderr"], c["samples"]) for c in cells])
    w.csv("histogram.csv", ["n", "mode", "N", "count"],
          [(h["n"], h["mode"], k, c) for h in hists for k, c in enumerate(h["counts"])])
    result = {"cells": cells, "histograms": hists, "outside_discrepancy": outside, "tranche_flags": flags}
    if p["cv_outer"]:
        n = min(p["n"])
        eps = p["cv_eps"] if p["cv_eps"] is not None else min(e for e in p["eps"] if e > 0)
        mode = p["modes"][0]
        if p["M_policy"] == "mode":
            if p["pilot_samples"]:
                pilot = estimate_mismatch(n, [eps], p["M_cap"], p["pilot_samples"], p["seed"] + 1, mode,
                                          p["reach_factor"], workers)
                hist = pilot.histogram
            else:
                hist = np.array(next(h["counts"] for h in hists if h["n"] == n and h["mode"] == mode))
            M = int(np.argmax(hist))
        else:
            M = int(p["M_policy"])
        rep = estimate_conditional_variance(n, eps, M, p["cv_outer"], p["cv_inner"], p["deltas"], p["seed"], mode,
                                            p["reach_factor"], workers)
        result["conditional_variance"] = {
            "n": n, "eps": eps, "M": M, "mode": mode, "event": "N == M",
            "variance": _est(rep.variance), "variance_N_ge_M": _est(rep.variance_ge), "rows": list(rep.rows),
        }
        w.csv("markov.csv", ["n", "eps", "M", "delta", "interior_fraction", "interior_stderr", "markov_bound",
                             "bound_stderr", "holds"],
              [(n, eps, M, r["delta"], r["interior_fraction"], r["interior_stderr"], r["markov_bound"],
                r["bound_stderr"], r["holds"]) for r in rep.rows])
        for r in rep.rows:
            checks[f"markov_bound[delta={r['delta']!r}]"] = r["holds"]
    if p["a_samples"]:
        stab = []
        for n in sorted(p["n"]):
            pa = p["a_p"] if p["a_p"] is not None else _cached_pn(
                w, n, p["l"], p["delta"], p["pn_samples"], p["seed"], workers)
            for e in eps_sorted:
                if e <= 0:
                    continue
                est = a_event_stability(n, e, pa, p["a_samples"], p["seed"], p["reach_factor"], workers)
                stab.append({"n": n, "eps": e, "p": pa, **_est(est)})
        result["a_event_stability"] = stab
    result["checks"] = checks
    return result


def _run_verify(p, w: Writer, workers: int) -> dict:
    from . import verify as V

    checks = V.run_all(p)
    w.csv("checks.csv", ["check", "passed", "detail"], [(c["name"], c["passed"], c["detail"]) for c in checks])
    return {"checks": {c["name"]: c["passed"] for c in checks}, "details": checks}


RUNNERS = {
    "invade": _run_invade,
    "crossings": _run_crossings,
    "arms": _run_arms,
    "corrlen": _run_corrlen,
    "splice": _run_splice,
    "verify": _run_verify,
}


def run(sub: str, config: Path, out: Path | None = None, workers: int | None = None, overrides=(),
        stdout=None) -> int:
    stdout = stdout or sys.stdout
    if sub not in SUBCOMMANDS:
        print(f"unknown subcommand {sub!r}", file=sys.stderr)
        return 1
    try:
        params, text = load_config(Path(config), sub, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    chash = config_hash(sub, params)
    if out is None:
        env = os.environ.get(ENV_OUTPUT)
        out = Path(env) if env else Path(params["output"] or f"runs/{sub}-{chash}")
    w = Writer(Path(out), sub, chash)
    (w.out / f"config_snapshot{Path(config).suffix or '.ini'}").write_text(text)
    try:
        result = RUNNERS[sub](params, w, workers or default_workers())
    except DomainError as exc:
        print(f"error: {config}:0: {exc}", file=sys.stderr)
        return 1
    w.json("summary.json", {"params": {k: v for k, v in params.items() if k != "output"}, **result})
    if sub in ("splice", "arms", "crossings"):
        emit_plot_data({"subcommand": sub, "config_hash": chash, **_jsonable(result)}, w.out, chash)
    checks = result.get("checks", {})
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=stdout)
    print(f"wrote {w.out}", file=stdout)
    if sub == "verify" and not all(checks.values()):
        return 2
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ipsplice", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", "-c", required=True, type=Path, help="INI or JSON config file")
    ap.add_argument("--out", "-o", type=Path, default=None, help=f"output directory (overrides ${ENV_OUTPUT})")
    ap.add_argument("--workers", "-j", type=int, default=None, help="worker processes (default: all CPUs)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config field")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    args = ap.parse_args(argv)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return 1
    return run(args.subcommand, args.config, args.out, args.workers, args.overrides)


if __name__ == "__main__":
    sys.exit(main())
