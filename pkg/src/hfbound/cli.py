"""Command-line frontend.

Every subcommand prints one JSON document to stdout (or --out).  Successful
results share an envelope: a "schema" tag naming the result type, the
"content" payload, a sha256 over the canonical content bytes, and a
"metadata" object holding timestamps and other run facts excluded from the
hash.  Identical configuration therefore yields identical content and
content_hash even though metadata varies run to run.

Exit codes: 0 success, 1 domain error (the computation itself refused),
2 usage error (bad flags or config).
"""

from __future__ import annotations

import argparse
import cmath
import hashlib
import json
import os
import re
import sys
import warnings
from datetime import datetime, timezone

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import __version__
from .cache import cache_lookup, cache_store, default_cache_dir
from .certificates import canonical_json
from .digraphs import find_two_cycles
from .errors import HfboundError, StageFailureError
from .estimator import separated_entropy_estimate
from .expr import eval_jet, parse_map
from .geometry import Disk
from .ifs import GAMMA_FACTOR
from .islands import build_digraph, find_islands
from .polylike import certify_polylike, entropy_from_polylike
from .render import MAX_PIXELS, render_escape
from .rescale import (
    CertificationRequest,
    certify_map,
    certify_via_islands,
    default_probes,
    entropy_ladder,
)
from .shifts import TransitionMatrix, sft_entropy

_CACHED_COMMANDS = {"polylike", "horseshoe", "certify", "ladder"}

# flags that shape the run but not the result content
_NON_CONTENT_KEYS = {"command", "out", "config", "cache", "cache_dir", "threads", "png"}


class UsageError(Exception):
    """Bad flag or config value; carries the flag and its expected form."""

    def __init__(self, flag: str, detail: str, expected: str):
        super().__init__(f"{flag}: {detail}")
        self.flag = flag
        self.detail = detail
        self.expected = expected


# ---------------------------------------------------------------------------
# flag value parsers (flags hold raw strings; handlers parse so every
# complaint can name its flag and schema)


def _parse_complex(text: str, flag: str) -> complex:
    s = str(text).strip().replace(" ", "")
    try:
        z = complex(s.replace("i", "j"))
    except ValueError:
        raise UsageError(
            flag, f"cannot parse {text!r} as a complex number", "RE+IMi, e.g. 1+1i, 2i, -0.5"
        ) from None
    if not cmath.isfinite(z):
        raise UsageError(flag, f"{text!r} is not finite", "a finite complex number")
    return z


def _parse_disk(text: str, flag: str) -> Disk:
    parts = str(text).split(",")
    if len(parts) != 3:
        raise UsageError(flag, f"expected 3 comma-separated numbers, got {text!r}", "X,Y,R")
    try:
        x, y, r = (float(p) for p in parts)
    except ValueError:
        raise UsageError(flag, f"non-numeric entry in {text!r}", "X,Y,R") from None
    if not r > 0.0:
        raise UsageError(flag, f"radius must be positive, got {r}", "X,Y,R with R > 0")
    return Disk(complex(x, y), r)


def _parse_probes(text: str, flag: str) -> list[complex]:
    out = []
    for chunk in str(text).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise UsageError(
                flag, f"probe {chunk!r} is not an X,Y pair", "X1,Y1;X2,Y2;..."
            )
        try:
            out.append(complex(float(parts[0]), float(parts[1])))
        except ValueError:
            raise UsageError(
                flag, f"non-numeric entry in probe {chunk!r}", "X1,Y1;X2,Y2;..."
            ) from None
    if not out:
        raise UsageError(flag, "no probes given", "X1,Y1;X2,Y2;...")
    return out


def _parse_targets(text: str, flag: str) -> tuple[int, ...]:
    try:
        targets = tuple(int(p) for p in str(text).split(","))
    except ValueError:
        raise UsageError(
            flag, f"cannot parse {text!r}", "comma-separated integers, e.g. 2,4,8"
        ) from None
    if not targets:
        raise UsageError(flag, "no targets given", "comma-separated integers >= 2")
    return targets


def _parse_window(text: str, flag: str) -> tuple[float, float, float, float]:
    parts = str(text).split(",")
    if len(parts) != 4:
        raise UsageError(
            flag, f"expected 4 comma-separated numbers, got {text!r}", "XMIN,XMAX,YMIN,YMAX"
        )
    try:
        xmin, xmax, ymin, ymax = (float(p) for p in parts)
    except ValueError:
        raise UsageError(flag, f"non-numeric entry in {text!r}", "XMIN,XMAX,YMIN,YMAX") from None
    if not (xmax > xmin and ymax > ymin):
        raise UsageError(flag, f"window {text!r} is empty", "XMIN < XMAX and YMIN < YMAX")
    return xmin, xmax, ymin, ymax


def _parse_resolution(text: str, flag: str) -> tuple[int, int]:
    s = str(text).lower()
    try:
        if "x" in s:
            w_str, h_str = s.split("x")
            width, height = int(w_str), int(h_str)
        else:
            width = height = int(s)
    except ValueError:
        raise UsageError(flag, f"cannot parse {text!r}", "N or WIDTHxHEIGHT") from None
    if width < 1 or height < 1:
        raise UsageError(flag, f"resolution must be positive, got {text!r}", "N or WIDTHxHEIGHT")
    if width * height > MAX_PIXELS:
        raise UsageError(
            flag,
            f"{width}x{height} exceeds the {MAX_PIXELS} pixel cap",
            f"total pixels <= {MAX_PIXELS}",
        )
    return width, height


def _parse_function(text: str):
    try:
        return parse_map(text)
    except HfboundError as e:
        raise UsageError(
            "--f", str(e), "expression in z over + - * / ^ with exp, sin, cos"
        ) from None


# ---------------------------------------------------------------------------
# config file and flag resolution


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as e:
        raise UsageError("--config", str(e), "path to a readable TOML file") from None
    except tomllib.TOMLDecodeError as e:
        raise UsageError("--config", f"invalid TOML: {e}", "key = value lines") from None


class _Resolver:
    """Flag > config > default, tracking which keys the config supplied."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config
        self.known: set[str] = set()

    def get(self, name: str, default=None):
        self.known.add(name)
        v = getattr(self.args, name, None)
        if v is not None:
            return v
        if name in self.config:
            return self.config[name]
        return default

    def require(self, name: str, expected: str):
        v = self.get(name)
        if v is None:
            flag = "--" + name.replace("_", "-")
            raise UsageError(flag, "missing required value", expected)
        return v

    def reject_unknown(self):
        extras = set(self.config) - self.known
        if extras:
            raise UsageError(
                "--config",
                f"unknown key(s) {sorted(extras)}",
                f"keys among {sorted(self.known)}",
            )


def _budget_overrides(res: _Resolver) -> dict:
    budgets = {}
    for key, caster in (
        ("delta", float),
        ("k_max", int),
        ("depth", int),
        ("conjugacy_tol", float),
        ("radius_doublings", int),
        ("zero_samples", int),
        ("grid_density", int),
    ):
        v = res.get(key)
        if v is not None:
            budgets[key] = caster(v)
    return budgets


# ---------------------------------------------------------------------------
# output


def _envelope(schema_name: str, content: dict) -> dict:
    return {
        "schema": f"{schema_name}/v1",
        "content": content,
        "content_hash": hashlib.sha256(canonical_json(content).encode()).hexdigest(),
        "metadata": {},
    }


def _emit(blob: dict, out_path: str | None) -> None:
    text = json.dumps(blob, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cert_content(cert) -> dict:
    return {
        "certificate": {
            "bound": cert.bound,
            "route": cert.route,
            "parameters": cert.parameters,
            "content_hash": cert.content_hash(),
        }
    }


# ---------------------------------------------------------------------------
# command handlers: each returns (schema_name, content, extra_metadata)


def _cmd_eval(res: _Resolver):
    f = _parse_function(res.require("f", "map expression"))
    z = _parse_complex(res.require("z", "complex evaluation point"), "--z")
    jet = eval_jet(f, complex(z))
    content = {
        "function": f.source,
        "point": [z.real, z.imag],
        "value": [jet.value.real, jet.value.imag],
        "derivative": [jet.deriv.real, jet.deriv.imag],
    }
    return "eval", content, {}


def _cmd_entropy_sft(res: _Resolver):
    raw = res.require("matrix", 'transition matrix JSON {"n":N,"rows":["01",...]}')
    try:
        matrix = TransitionMatrix.from_json(raw)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        raise UsageError(
            "--matrix", str(e), '{"n":N,"rows":["01",...]} with N row strings of length N'
        ) from None
    content = {"n": matrix.n, "entropy": sft_entropy(matrix)}
    return "sft_entropy", content, {}


def _cmd_estimate(res: _Resolver):
    f = _parse_function(res.require("f", "map expression"))
    radius = float(res.get("radius", 1.0))
    count = int(res.get("samples", 400))
    seed = int(res.get("seed", 0))
    n_max = int(res.get("n_max", 12))
    epsilon = float(res.require("epsilon", "separation scale > 0"))
    if radius <= 0.0:
        raise UsageError("--radius", f"must be positive, got {radius}", "R > 0")
    if count < 1:
        raise UsageError("--samples", f"must be >= 1, got {count}", "integer >= 1")
    rng = np.random.default_rng(seed)
    pts = radius * np.sqrt(rng.uniform(0.0, 1.0, count)) * np.exp(
        2j * np.pi * rng.uniform(0.0, 1.0, count)
    )
    est = separated_entropy_estimate(f, pts, n_max, epsilon)
    content = {
        "function": f.source,
        "radius": radius,
        "sample_count": count,
        "seed": seed,
        "estimate": est.to_json(),
    }
    return "estimate", content, {}


def _cmd_islands(res: _Resolver):
    f = _parse_function(res.require("f", "map expression"))
    source = _parse_disk(res.require("source", "source disk X,Y,R"), "--source")
    target = _parse_disk(res.require("target", "target disk X,Y,R"), "--target")
    found = find_islands(f, source, target, grid_density=int(res.get("grid_density", 12)))
    content = {
        "function": f.source,
        "source": source.to_json(),
        "target": target.to_json(),
        "count": len(found),
        "islands": [w.summary_json() for w in found],
    }
    return "islands", content, {}


def _cmd_digraph(res: _Resolver):
    f = _parse_function(res.require("f", "map expression"))
    probes = _parse_probes(res.require("probes", "probe centers X1,Y1;X2,Y2;..."), "--probes")
    if len(probes) >= 2:
        min_gap = min(
            abs(a - b) for i, a in enumerate(probes) for b in probes[i + 1 :]
        )
    else:
        min_gap = 1.0
    delta = float(res.get("delta", 0.45 * min_gap))
    gamma = float(res.get("gamma", delta / GAMMA_FACTOR))
    k = int(res.get("k", 4))
    g = build_digraph(f, probes, gamma, delta, grid_density=int(res.get("grid_density", 12)))
    adjacency = ["".join("1" if c else "0" for c in row) for row in g.adjacency()]
    meta = {}
    try:
        two_cycle = find_two_cycles(g, k).to_json()
    except HfboundError as e:
        two_cycle = None
        meta["two_cycle_note"] = f"{type(e).__name__}: {e}"
    content = {
        "function": f.source,
        "probes": [[p.real, p.imag] for p in probes],
        "gamma": gamma,
        "delta": delta,
        "adjacency": adjacency,
        "edge_count": len(g.edges),
        "min_nonself_out_degree": g.min_nonself_out_degree(),
        "two_cycle": two_cycle,
    }
    return "digraph", content, meta


def _cmd_polylike(res: _Resolver):
    f = _parse_function(res.require("f", "map expression"))
    domain = _parse_disk(res.require("domain", "domain disk X,Y,R"), "--domain")
    rng_disk = _parse_disk(res.require("range", "range disk X,Y,R"), "--range")
    seed = _parse_complex(res.get("seed_point", "0"), "--seed-point")
    p = certify_polylike(f, domain, rng_disk, seed)
    cert = entropy_from_polylike(p)
    return "certificate", _cert_content(cert), {}


def _cmd_horseshoe(res: _Resolver):
    f = _parse_function(res.require("f", "map expression"))
    raw_probes = res.get("probes")
    probes = (
        _parse_probes(raw_probes, "--probes") if raw_probes is not None else default_probes(f)
    )
    req = CertificationRequest(
        f, 2, route_preference="islands", budgets=_budget_overrides(res)
    )
    cert = certify_via_islands(req, probes)
    return "certificate", _cert_content(cert), {}


def _cmd_certify(res: _Resolver):
    f = _parse_function(res.require("f", "map expression"))
    target = int(res.require("target", "integer >= 2"))
    if target < 2:
        raise UsageError("--target", f"must be >= 2, got {target}", "integer >= 2")
    route = str(res.get("route", "auto"))
    if route not in ("auto", "zeros", "islands"):
        raise UsageError("--route", f"unknown route {route!r}", "auto | zeros | islands")
    raw_probes = res.get("probes")
    probes = _parse_probes(raw_probes, "--probes") if raw_probes is not None else None
    req = CertificationRequest(
        f, target, route_preference=route, budgets=_budget_overrides(res)
    )
    cert = certify_map(req, probes)
    return "certificate", _cert_content(cert), {}


def _cmd_ladder(res: _Resolver):
    f = _parse_function(res.require("f", "map expression"))
    targets = _parse_targets(res.require("targets", "comma-separated integers >= 2"), "--targets")
    raw_probes = res.get("probes")
    probes = _parse_probes(raw_probes, "--probes") if raw_probes is not None else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ladder = entropy_ladder(f, targets, probes=probes, budgets=_budget_overrides(res))
    content = {
        "function": f.source,
        "targets": list(targets),
        "bounds": [c.bound for c in ladder],
        "certificates": [_cert_content(c)["certificate"] for c in ladder],
        "failures": ladder.failures,
    }
    meta = {}
    if caught:
        meta["warnings"] = [str(w.message) for w in caught]
    return "ladder", content, meta


def _cmd_render(res: _Resolver, threads: int):
    f = _parse_function(res.require("f", "map expression"))
    window = _parse_window(res.require("window", "XMIN,XMAX,YMIN,YMAX"), "--window")
    resolution = _parse_resolution(res.get("resolution", "512"), "--resolution")
    iterations = int(res.get("iterations", 64))
    if iterations < 1:
        raise UsageError("--iterations", f"must be >= 1, got {iterations}", "integer >= 1")
    escape_radius = float(res.get("escape_radius", 2.0))
    if escape_radius <= 0.0:
        raise UsageError("--escape-radius", f"must be positive, got {escape_radius}", "R > 0")
    result = render_escape(f, window, iterations, escape_radius, resolution, threads=threads)
    meta = {}
    png = res.get("png")
    if png is not None:
        result.save_png(png)
        meta["png_path"] = str(png)
    content = {"function": f.source}
    content.update(result.to_json())
    return "render", content, meta


# ---------------------------------------------------------------------------
# parser


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", metavar="PATH", help="write the JSON result here instead of stdout")
    sub.add_argument("--config", metavar="TOML", help="read flag defaults from a TOML file")
    sub.add_argument(
        "--threads",
        type=int,
        metavar="N",
        help="worker threads for parallel stages (default: logical cores)",
    )
    sub.add_argument(
        "--cache", action="store_true", help="reuse and store results in the content cache"
    )
    sub.add_argument(
        "--cache-dir",
        metavar="DIR",
        help="cache location (default: HF_CACHE_DIR or ~/.cache/hfbound)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hfbound",
        description="Certified lower bounds for the topological entropy of entire maps.",
    )
    parser.add_argument("--version", action="version", version=f"hfbound {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = subs.add_parser("eval", help="evaluate a map and its derivative at a point")
    p.add_argument("--f", metavar="EXPR", help="map expression, e.g. 'z^2' or 'exp(z)'")
    p.add_argument("--z", metavar="C", help="evaluation point, e.g. '1+1i'")
    _add_common(p)

    p = subs.add_parser("entropy-sft", help="entropy of a subshift of finite type")
    p.add_argument(
        "--matrix", metavar="JSON", help='transition matrix, e.g. \'{"n":2,"rows":["11","11"]}\''
    )
    _add_common(p)

    p = subs.add_parser("estimate", help="separated-set entropy estimate from sampled orbits")
    p.add_argument("--f", metavar="EXPR", help="map expression")
    p.add_argument("--epsilon", metavar="E", help="separation scale")
    p.add_argument("--radius", metavar="R", help="sampling disk radius (default 1)")
    p.add_argument("--samples", metavar="N", help="sample count (default 400)")
    p.add_argument("--n-max", dest="n_max", metavar="K", help="largest horizon (default 12)")
    p.add_argument("--seed", metavar="S", help="sampling RNG seed (default 0)")
    _add_common(p)

    p = subs.add_parser("islands", help="verified islands over a target disk inside a source disk")
    p.add_argument("--f", metavar="EXPR", help="map expression")
    p.add_argument("--source", metavar="X,Y,R", help="source disk")
    p.add_argument("--target", metavar="X,Y,R", help="target disk")
    p.add_argument("--grid-density", dest="grid_density", metavar="N", help="seed grid density")
    _add_common(p)

    p = subs.add_parser("digraph", help="island digraph over probe centers plus two-cycle search")
    p.add_argument("--f", metavar="EXPR", help="map expression")
    p.add_argument("--probes", metavar="PTS", help="probe centers X1,Y1;X2,Y2;...")
    p.add_argument("--delta", metavar="D", help="target disk radius")
    p.add_argument("--gamma", metavar="G", help="source disk radius (default delta/648)")
    p.add_argument("--k", metavar="K", help="sparsity defect for the two-cycle search (default 4)")
    p.add_argument("--grid-density", dest="grid_density", metavar="N", help="seed grid density")
    _add_common(p)

    p = subs.add_parser("horseshoe", help="islands-route certificate for a map")
    p.add_argument("--f", metavar="EXPR", help="map expression")
    p.add_argument("--probes", metavar="PTS", help="probe centers (default: imaginary-axis ring)")
    p.add_argument("--delta", metavar="D", help="target disk radius override")
    p.add_argument("--k-max", dest="k_max", metavar="K", help="largest rescale index scanned")
    p.add_argument("--depth", metavar="D", help="conjugacy verification depth")
    p.add_argument(
        "--conjugacy-tol", dest="conjugacy_tol", metavar="T", help="conjugacy defect tolerance"
    )
    _add_common(p)

    p = subs.add_parser("polylike", help="polynomial-like restriction certificate")
    p.add_argument("--f", metavar="EXPR", help="map expression")
    p.add_argument("--domain", metavar="X,Y,R", help="domain disk")
    p.add_argument("--range", metavar="X,Y,R", help="range disk")
    p.add_argument(
        "--seed-point", dest="seed_point", metavar="C", help="interior seed (default 0)"
    )
    _add_common(p)

    p = subs.add_parser("certify", help="entropy certificate for a target symbol count")
    p.add_argument("--f", metavar="EXPR", help="map expression")
    p.add_argument("--target", metavar="M", help="certified symbol count, integer >= 2")
    p.add_argument("--route", metavar="R", help="auto | zeros | islands (default auto)")
    p.add_argument("--probes", metavar="PTS", help="islands-route probe centers")
    p.add_argument("--delta", metavar="D", help="target disk radius override")
    p.add_argument("--k-max", dest="k_max", metavar="K", help="largest rescale index scanned")
    p.add_argument("--depth", metavar="D", help="conjugacy verification depth")
    p.add_argument(
        "--conjugacy-tol", dest="conjugacy_tol", metavar="T", help="conjugacy defect tolerance"
    )
    p.add_argument(
        "--radius-doublings",
        dest="radius_doublings",
        metavar="N",
        help="zero-search radius budget",
    )
    p.add_argument(
        "--zero-samples", dest="zero_samples", metavar="N", help="zero-count boundary samples"
    )
    _add_common(p)

    p = subs.add_parser("ladder", help="one certificate per target, nondecreasing bounds")
    p.add_argument("--f", metavar="EXPR", help="map expression")
    p.add_argument("--targets", metavar="MS", help="comma-separated targets, e.g. 2,4,8")
    p.add_argument("--probes", metavar="PTS", help="islands-route probe centers")
    p.add_argument("--k-max", dest="k_max", metavar="K", help="largest rescale index scanned")
    p.add_argument("--depth", metavar="D", help="conjugacy verification depth")
    _add_common(p)

    p = subs.add_parser("render", help="escape-time image of a map over a window")
    p.add_argument("--f", metavar="EXPR", help="map expression")
    p.add_argument("--window", metavar="W", help="XMIN,XMAX,YMIN,YMAX")
    p.add_argument("--iterations", metavar="N", help="orbit length (default 64)")
    p.add_argument(
        "--escape-radius", dest="escape_radius", metavar="R", help="escape radius (default 2)"
    )
    p.add_argument("--resolution", metavar="RES", help="N or WIDTHxHEIGHT (default 512)")
    p.add_argument("--png", metavar="PATH", help="also write a grayscale PNG here")
    _add_common(p)

    return parser


_HANDLERS = {
    "eval": _cmd_eval,
    "entropy-sft": _cmd_entropy_sft,
    "estimate": _cmd_estimate,
    "islands": _cmd_islands,
    "digraph": _cmd_digraph,
    "horseshoe": _cmd_horseshoe,
    "polylike": _cmd_polylike,
    "certify": _cmd_certify,
    "ladder": _cmd_ladder,
    "render": _cmd_render,
}


def _cache_request(command: str, args: argparse.Namespace, config: dict) -> dict:
    params = {
        k: v
        for k, v in vars(args).items()
        if k not in _NON_CONTENT_KEYS and v is not None
    }
    cfg = {
        k: v
        for k, v in config.items()
        if k not in _NON_CONTENT_KEYS and k not in params
    }
    params.update(cfg)
    return {"command": command, "params": params}


# a value token like "-2,2,-2,2" or "-1+1i" would otherwise parse as a flag
_NEGATIVE_VALUE = re.compile(r"^-(\d|\.\d|i$)")


def _merge_negative_values(argv: list[str]) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (
            tok.startswith("--")
            and "=" not in tok
            and tok != "--cache"
            and i + 1 < len(argv)
            and _NEGATIVE_VALUE.match(argv[i + 1])
        ):
            out.append(tok + "=" + argv[i + 1])
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run_command(argv) -> int:
    """Parse argv, run the named subcommand, emit JSON, return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(_merge_negative_values(list(argv)))
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        sys.stderr.write("hfbound: error: a COMMAND is required\n")
        return 2

    out_path = getattr(args, "out", None)
    try:
        config = _load_config(args.config) if getattr(args, "config", None) else {}
        if not isinstance(config, dict):
            raise UsageError("--config", "top level is not a table", "key = value lines")
        res = _Resolver(args, config)
        res.known.update(_NON_CONTENT_KEYS - {"command"})
        threads = res.get("threads") or os.cpu_count() or 1
        threads = int(threads)
        out_path = out_path or config.get("out")

        use_cache = bool(getattr(args, "cache", False) or config.get("cache"))
        cache_dir = res.get("cache_dir") or default_cache_dir()
        started = datetime.now(timezone.utc)

        if use_cache and args.command in _CACHED_COMMANDS:
            request = _cache_request(args.command, args, config)
            hit = cache_lookup(request, cache_dir)
            if hit is not None:
                hit["metadata"] = {
                    "tool_version": __version__,
                    "created_at": started.isoformat(),
                    "cache": "hit",
                }
                _emit(hit, out_path)
                return 0

        handler = _HANDLERS[args.command]
        if args.command == "render":
            schema_name, content, meta = handler(res, threads)
        else:
            schema_name, content, meta = handler(res)
        res.reject_unknown()

        blob = _envelope(schema_name, content)
        elapsed = (datetime.now(timezone.utc) - started).total_seconds()
        blob["metadata"] = {
            "tool_version": __version__,
            "created_at": started.isoformat(),
            "elapsed_s": round(elapsed, 6),
            **meta,
        }
        if use_cache and args.command in _CACHED_COMMANDS:
            stored = {k: blob[k] for k in ("schema", "content", "content_hash")}
            stored["metadata"] = {}
            cache_store(request, stored, cache_dir)
            blob["metadata"]["cache"] = "store"
        _emit(blob, out_path)
        return 0
    except UsageError as e:
        sys.stderr.write(f"hfbound {args.command}: usage error: {e.flag}: {e.detail}\n")
        sys.stderr.write(f"  expected: {e.expected}\n")
        return 2
    except HfboundError as e:
        blob = {"schema": "error/v1", "error": {"type": type(e).__name__, "message": str(e)}}
        if isinstance(e, StageFailureError):
            blob["error"]["stage"] = e.stage
        _emit(blob, out_path)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
