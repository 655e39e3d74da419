"""Command-line harness: overlap-kernels <command> [options].

Every command writes CSV: a block of '# key=value' header lines (version,
command, the merged configuration, seed) followed by a rectangular table.
Floats use '%.17g'.  Nothing time- or host-dependent goes into the output,
so a repeated run with the same configuration is byte-identical.

Configuration comes from an optional flat key=value file (--config); any
flag given on the command line overrides the file.  Keys are the long
option names with dashes or underscores.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .special import DomainError

COMMANDS = ("kernel-eval", "limit-eval", "converge-scan", "sample", "overlap-mc", "validate")

# key -> (type, default).  "clist" is a comma separated list of complex numbers,
# "ilist" of integers.
OPTIONS: dict[str, tuple[str, object]] = {
    "seed": ("int", 0),
    "workers": ("int", None),
    "out": ("str", "-"),
    "tol": ("float", None),
    "N": ("ilist", None),
    "n": ("float", None),
    "L": ("float", None),
    "regime": ("str", "bulk"),
    "a": ("float", 1.0),
    "b": ("float", 1.0),
    "p": ("float", None),
    "edge_side": ("str", "outer"),
    "theta": ("float", 0.0),
    "rho": ("float", 1.5),
    "L_fixed": ("float", 2.0),
    "z": ("clist", None),
    "w": ("clist", None),
    "lam": ("clist", None),
    "chi": ("complex", 0.25),
    "method": ("str", "both"),
    "normalization": ("str", "local"),
    "samples": ("int", 100),
    "offdiag_out": ("str", None),
    "offdiag": ("bool", False),
    "ks": ("bool", False),
}


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def parse_complex(s: str) -> complex:
    t = s.strip().replace(" ", "").replace("i", "j")
    return complex(t)


def _convert(key: str, raw):
    kind = OPTIONS[key][0]
    if raw is None:
        return None
    if kind in ("str",):
        return str(raw)
    try:
        if kind == "int":
            v = int(raw)
            if key == "seed" and not 0 <= v < 2 ** 64:
                raise ValueError("must be an unsigned 64-bit integer")
            return v
        if kind == "float":
            return float(raw)
        if kind == "complex":
            return parse_complex(str(raw))
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "ilist":
            if isinstance(raw, list):
                items = raw
            else:
                items = [t for t in str(raw).split(",") if t.strip()]
            return [int(t) for t in items]
        if kind == "clist":
            items = raw if isinstance(raw, list) else [t for t in str(raw).split(",") if t.strip()]
            return [parse_complex(str(t)) for t in items]
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None
    raise AssertionError(kind)


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError("config", str(exc)) from None
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigError("config", f"line {lineno}: expected key=value")
        k, v = s.split("=", 1)
        k = k.strip().replace("-", "_")
        if k not in OPTIONS:
            raise ConfigError(k, f"unknown key (line {lineno})")
        out[k] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="overlap-kernels", allow_abbrev=False, description="Eigenvector-overlap kernels of the induced spherical ensemble.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", default=None, help="flat key=value file; flags override it")
    for key, (kind, _) in OPTIONS.items():
        flag = "--" + key.replace("_", "-")
        if kind == "bool":
            ap.add_argument(flag, dest=key, action="store_const", const="true", default=None)
        elif kind == "ilist":
            ap.add_argument(flag, dest=key, nargs="+", default=None)
        else:
            ap.add_argument(flag, dest=key, default=None)
    return ap


def merge_config(ns: argparse.Namespace) -> dict:
    raw: dict[str, object] = {}
    if ns.config:
        raw.update(read_config_file(ns.config))
    for key in OPTIONS:
        v = getattr(ns, key)
        if v is None:
            continue
        if OPTIONS[key][0] == "ilist":
            v = [t for part in v for t in str(part).split(",") if t.strip()]
        raw[key] = v
    cfg = {}
    for key, (_, default) in OPTIONS.items():
        cfg[key] = _convert(key, raw[key]) if key in raw else default
    if cfg["workers"] is None:
        from .sampler import default_workers
        cfg["workers"] = default_workers()
    if cfg["workers"] < 1:
        raise ConfigError("workers", "must be positive")
    return cfg


# ---------------------------------------------------------------- output

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _echo_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, list):
        return ",".join(_echo_value(t) for t in v)
    if isinstance(v, complex):
        return "%.17g%+.17gj" % (v.real, v.imag)
    return fmt(v)


@dataclass
class Table:
    columns: list[str]
    rows: list[list]
    extra_header: dict | None = None


def render(command: str, cfg: dict, table: Table) -> str:
    buf = io.StringIO()
    buf.write(f"# version={__version__}\n")
    buf.write(f"# command={command}\n")
    for key in sorted(cfg):
        # worker count never changes results, so it stays out of the echo
        if key in ("workers", "out"):
            continue
        buf.write(f"# {key}={_echo_value(cfg[key])}\n")
    for k, v in (table.extra_header or {}).items():
        buf.write(f"# {k}={_echo_value(v)}\n")
    buf.write(",".join(table.columns) + "\n")
    for r in table.rows:
        buf.write(",".join(fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _write(path: str, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------- helpers

def _params(cfg: dict, N: int | None = None):
    from .limits import RegimeSpec, regime_to_params
    from .structures import EnsembleParams

    Ns = cfg["N"] or [10]
    N = Ns[0] if N is None else N
    if cfg["n"] is not None or cfg["L"] is not None:
        if cfg["n"] is None or cfg["L"] is None:
            raise ConfigError("n" if cfg["n"] is None else "L", "give both n and L, or neither")
        return EnsembleParams(N, cfg["n"], cfg["L"])
    return regime_to_params(_regime(cfg), N)


def _regime(cfg: dict):
    from .limits import RegimeSpec

    try:
        return RegimeSpec(cfg["regime"], a=cfg["a"], b=cfg["b"], edge_side=cfg["edge_side"],
                          theta=cfg["theta"], rho=cfg["rho"], L_fixed=cfg["L_fixed"], p=cfg["p"])
    except ValueError as exc:
        raise ConfigError("regime", str(exc)) from None


def _points(cfg: dict, key: str, fallback: list[complex]) -> list[complex]:
    v = cfg[key]
    return list(fallback) if not v else list(v)


def _broadcast(*lists):
    n = max(len(x) for x in lists)
    for x in lists:
        if len(x) not in (1, n):
            raise ConfigError("z", "point lists must have equal length or length 1")
    return [[x[i] if len(x) > 1 else x[0] for x in lists] for i in range(n)]


# ---------------------------------------------------------------- commands

def cmd_kernel_eval(cfg: dict) -> Table:
    from .finite import K11_finite

    P = _params(cfg)
    methods = {"both": ["direct", "simplified"], "direct": ["direct"], "simplified": ["simplified"]}.get(cfg["method"])
    if methods is None:
        raise ConfigError("method", "expected direct, simplified or both")
    zs = _points(cfg, "z", [0.5 + 0.2j])
    ws = _points(cfg, "w", [0.6 - 0.1j])
    ls = _points(cfg, "lam", [0.55 + 0.05j])
    rows = []
    for z, w, lam in _broadcast(zs, ws, ls):
        for m in methods:
            ev = K11_finite(z, w, lam, P, m)
            rows.append([P.N, float(P.n), float(P.L), z.real, z.imag, w.real, w.imag, lam.real, lam.imag,
                         ev.method, ev.value.real, ev.value.imag, bool(ev.regularized)])
    return Table(["N", "n", "L", "re_z", "im_z", "re_w", "im_w", "re_lam", "im_lam", "method", "re_K", "im_K", "regularized"], rows)


def cmd_limit_eval(cfg: dict) -> Table:
    from .limits import LimitKernel

    spec = _regime(cfg)
    lk = LimitKernel(spec)
    zs = _points(cfg, "z", [0.3 + 0.1j])
    ws = _points(cfg, "w", [-0.2 + 0.4j])
    chi = cfg["chi"]
    rows = []
    for z, w in _broadcast(zs, ws):
        _, reg = lk.reduced(z.conjugate(), w, chi, chi.conjugate())
        K = lk.K11(z, w, chi)
        rows.append([spec.kind, z.real, z.imag, w.real, w.imag, chi.real, chi.imag, K.real, K.imag, bool(reg)])
    return Table(["regime", "re_zeta", "im_zeta", "re_eta", "im_eta", "re_chi", "im_chi", "re_K", "im_K", "regularized"], rows)


def cmd_converge_scan(cfg: dict) -> Table:
    from .oracles import convergence_scan

    spec = _regime(cfg)
    Ns = cfg["N"] or [25, 50, 100]
    if cfg["normalization"] not in ("local", "fixed"):
        raise ConfigError("normalization", "expected local or fixed")
    rows = [[N, e] for N, e in convergence_scan(spec, Ns, chi=cfg["chi"], normalization=cfg["normalization"])]
    return Table(["N", "sup_err"], rows)


def _sample_config(cfg: dict):
    from .sampler import SampleConfig

    P = _params(cfg)
    try:
        return SampleConfig(P, cfg["samples"], seed=cfg["seed"], workers=cfg["workers"])
    except ValueError as exc:
        raise ConfigError("samples", str(exc)) from None


def cmd_sample(cfg: dict) -> Table:
    from .sampler import overlap_batch

    sc = _sample_config(cfg)
    want = cfg["offdiag_out"] is not None
    batch = overlap_batch(sc, want_offdiag=want)
    rows = []
    for s, (lam, O) in enumerate(zip(batch.eigenvalues, batch.diag_overlaps)):
        for l, o in zip(lam, O):
            rows.append([s, float(l.real), float(l.imag), float(o)])
    if want:
        off = [[s, j, k, v.real, v.imag] for s, items in enumerate(batch.offdiag) for j, k, v in items]
        text = render("sample", cfg, Table(["sample_id", "j", "k", "re_O", "im_O"], off))
        _write(cfg["offdiag_out"], text)
    return Table(["sample_id", "re_lambda", "im_lambda", "O_diag"], rows, {"resampled": batch.resampled})


def cmd_overlap_mc(cfg: dict) -> Table:
    from .sampler import mc_prop21_distribution, mc_quenched_ratio

    sc = _sample_config(cfg)
    rows = []
    mean, se = mc_quenched_ratio(sc)
    rows.append(["O11_over_quenched", mean, se])
    if cfg["offdiag"]:
        mean, se = mc_quenched_ratio(sc, offdiag=True)
        rows.append(["O12_over_quenched", mean, se])
    if cfg["ks"]:
        res = mc_prop21_distribution(sc)
        rows.append(["product_law_ks_statistic", float(res.statistic), float(res.pvalue)])
    return Table(["quantity", "value", "stderr_or_pvalue"], rows)


def cmd_validate(cfg: dict) -> Table:
    from .validate import run_suite

    rows = [[r.name, r.residual, r.tol, "pass" if r.ok else "fail"] for r in run_suite(cfg["seed"])]
    return Table(["invariant", "residual", "tol", "status"], rows)


HANDLERS = {
    "kernel-eval": cmd_kernel_eval,
    "limit-eval": cmd_limit_eval,
    "converge-scan": cmd_converge_scan,
    "sample": cmd_sample,
    "overlap-mc": cmd_overlap_mc,
    "validate": cmd_validate,
}


def _error(kind: str, message: str, field: str | None = None, code: int = 1) -> int:
    rec = {"error": kind, "message": message}
    if field is not None:
        rec["field"] = field
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = merge_config(ns)
        table = HANDLERS[ns.command](cfg)
        text = render(ns.command, cfg, table)
        _write(cfg["out"], text)
    except ConfigError as exc:
        return _error("config", exc.message, exc.field, 2)
    except DomainError as exc:
        return _error("config", str(exc), "params", 2)
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        return _error(type(exc).__name__, str(exc))
    if ns.command == "validate" and any(r[3] == "fail" for r in table.rows):
        return 1
    if ns.command == "converge-scan" and cfg["tol"] is not None and table.rows[-1][1] > cfg["tol"]:
        # --tol turns the scan into a gate on the finest N
        return _error("tolerance", f"sup_err {table.rows[-1][1]:.3g} at N={table.rows[-1][0]} exceeds tol {cfg['tol']:.3g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
