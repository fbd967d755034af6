"""Command-line front end: certify, validate, scan, appendix.

Exit codes: 0 success, 2 certification or input failure (a JSON error
record goes to stdout), 3 envelope domination failure (the witness row is
echoed in the summary).  Diagnostics go to stderr.
"""

import argparse
from dataclasses import replace
import hashlib
import json
import logging
import math
import os
import sys
from typing import List, Literal, Optional, Union

import numpy as np
from scipy.linalg import expm
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .applications import (bidomain_family, bidomain_operator, bidomain_problem, nagumo_problem,
                           rd_family, rd_operator)
from .envelope import (DecayEnvelope, build_ingredients, simple_zero_envelope, uniform_envelope)
from .errors import ConfigError, HashMismatch, UnidecayError, _jsonable
from .operator_core import GeneratorModel, operator_norm, polynomial_family, spectral_abscissa
from .validator import (PASS_TOL, default_grids, destabilization_example, multiplication_sweep,
                        resolvent_family_bound_check, validate_envelope)

log = logging.getLogger("unidecay")

OUT_ENV = "UNIDECAY_OUT"
DEFAULT_OUT = "unidecay-out"
SCAN_HEADER = "xi,alpha,weighted_sup,log_prefactor,spectral_abscissa"


# ---------------------------------------------------------------- config schema

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


Entry = Union[float, List[float]]      # real number or [re, im] pair


class MatrixFamilyPayload(_Strict):
    base: List[List[Entry]]
    coefficients: List[List[List[Entry]]] = Field(min_length=1)
    q1: float = Field(gt=0)
    q2: Optional[float] = None
    nu: float = Field(gt=0)
    M1: Optional[float] = None
    label: str = "matrix-family"


class RDPayload(_Strict):
    a: float = 0.3
    d: float = Field(1.1, gt=0)
    D: Optional[float] = None
    n: int = Field(128, ge=8)
    pin_zero_mode: bool = True
    nu: Optional[float] = None


class BidomainPayload(_Strict):
    nu1: float = 0.05
    nu2: float = 0.02
    gamma: float = math.pi / 6
    a: float = 0.3
    n: int = Field(128, ge=8)
    seam: float = Field(0.1, gt=0, lt=1)
    branch: Literal["+", "-"] = "+"
    nu: Optional[float] = None


class AppendixPayload(_Strict):
    b0: List[float] = [-0.45, -0.3, -0.25]
    sweep_b0: float = -0.3


class Grids(_Strict):
    alpha: Optional[List[float]] = None
    t: Optional[List[float]] = None
    xi: Optional[List[float]] = None


class Tolerances(_Strict):
    pass_tol: float = PASS_TOL


class RunConfig(_Strict):
    kind: Literal["matrix-family", "rd", "bidomain", "appendix"]
    problem: dict = Field(default_factory=dict)
    kappas: List[float] = [0.5]
    envelope: Literal["auto", "uniform", "uniform-simple"] = "auto"
    grids: Grids = Field(default_factory=Grids)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    out: Optional[str] = None
    seed: int = 0

    def payload(self):
        cls = {"matrix-family": MatrixFamilyPayload, "rd": RDPayload, "bidomain": BidomainPayload,
               "appendix": AppendixPayload}[self.kind]
        return cls.model_validate(self.problem)


def parse_config(text):
    """RunConfig from JSON text, with the kind-specific payload validated up front."""
    try:
        cfg = RunConfig.model_validate_json(text)
        cfg.payload()
    except ValidationError as exc:
        raise ConfigError("invalid config", errors=json.loads(exc.json())) from None
    for k in cfg.kappas:
        if not 0 < k < 1:
            raise ConfigError("kappa must lie in (0, 1)", kappa=k)
    return cfg


def serialize_config(cfg):
    return cfg.model_dump_json(indent=2)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def problem_hash(cfg):
    """sha256 over the kind and the normalised payload (defaults filled in)."""
    doc = {"kind": cfg.kind, "problem": cfg.payload().model_dump(mode="json")}
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _matrix(rows):
    return np.array([[complex(e[0], e[1]) if isinstance(e, list) else complex(e) for e in row]
                     for row in rows])


def encode_matrix(m):
    """Row-major nested [re, im] pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


# ---------------------------------------------------------------- problem assembly

def build_family(cfg, branch=None):
    """(family, nu, operator(xi) or None) for the configured problem."""
    p = cfg.payload()
    if cfg.kind == "matrix-family":
        base = GeneratorModel(_matrix(p.base), p.label, "config")
        q2 = math.inf if p.q2 is None else p.q2
        fam = polynomial_family(base, [_matrix(w) for w in p.coefficients], q1=p.q1, q2=q2, label=p.label)
        m1 = resolvent_family_bound_check(fam).M1 if p.M1 is None else p.M1
        return replace(fam, M1=m1), p.nu, None
    if cfg.kind == "rd":
        prob = nagumo_problem(a=p.a, d=p.d, n=p.n, pin_zero_mode=p.pin_zero_mode, D=p.D)
        fam = rd_family(prob, nu=p.nu)
        return fam, fam.metadata["nu"], (lambda xi: rd_operator(prob, xi * xi))
    if cfg.kind == "bidomain":
        prob = bidomain_problem(nu1=p.nu1, nu2=p.nu2, gamma=p.gamma, a=p.a, n=p.n, seam=p.seam)
        fam = bidomain_family(prob, branch or p.branch, nu=p.nu)
        return fam, fam.metadata["nu"], (lambda xi: bidomain_operator(prob, xi))
    raise ConfigError("kind %r has no perturbation family" % cfg.kind)


def _envelope(cfg, ing, kappa):
    mode = cfg.envelope
    if mode == "auto":
        mode = "uniform-simple" if ing.rank == 1 else "uniform"
    return simple_zero_envelope(ing, kappa) if mode == "uniform-simple" else uniform_envelope(ing, kappa)


def _envelope_record(env):
    rec = env.to_dict()
    led = env.ledger
    if "M4" in led:
        rec["M4"] = led["M4"]["value"] if isinstance(led["M4"], dict) else led["M4"]
    if "eps" in led:
        rec.update({"eps2": led["eps"]["eps2"], "eps3": led["eps"]["eps3"]})
    if "eps4" in led:
        rec["eps4"] = led["eps4"]
    return rec


def certify(cfg):
    """The certificate document for cfg (a dict)."""
    doc = {"tool": "unidecay", "version": __version__, "config_hash": problem_hash(cfg),
           "kind": cfg.kind}
    envs = []
    fam, nu, _ = build_family(cfg)
    ing = build_ingredients(fam, nu, alpha_grid=None if cfg.grids.alpha is None else
                            np.array([a for a in cfg.grids.alpha if a > 0]))
    for k in cfg.kappas:
        envs.append(_envelope_record(_envelope(cfg, ing, k)))
    ingd = ing.to_dict()
    doc.update({"family": fam.label, "sector": ingd["family_cert"]["base"],
                "family_cert": {k: v for k, v in ingd["family_cert"].items() if k != "base"},
                "nu": ing.nu, "M1": ing.M1, "M2": ing.M2, "M3": ing.M3, "eps0": ing.eps0,
                "eps1": ing.eps1, "q1": ing.q1, "q2": ingd["q2"], "sup_E0": ing.sup_E0,
                "rank_P0": ing.rank, "evidence": ingd["evidence"],
                "family_metadata": fam.metadata, "envelopes": envs})
    return _clean(doc)


def _clean(obj):
    """JSON-safe copy: numpy types unwrapped, complex as [re, im], non-finite floats as strings."""
    obj = _jsonable(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if obj != obj else ("inf" if obj > 0 else "-inf")
    if callable(obj):
        return getattr(obj, "__name__", "callable")
    return obj


def _unclean(x):
    return {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}.get(x, x) if isinstance(x, str) else x


def envelope_from_record(rec):
    """Rebuild an envelope; the smaller of the log and value prefactor fields wins."""
    rec = json.loads(json.dumps(rec))
    pref = rec["prefactor"]
    lg = float(_unclean(pref["log"]))
    val = _unclean(pref.get("value"))
    if isinstance(val, (int, float)) and val is not None and math.isfinite(val):
        lg = min(lg, math.log(val) if val > 0 else -math.inf)
    pref["log"] = lg
    rec["q2"] = _unclean(rec.get("q2"))
    if rec["q2"] == math.inf:
        rec["q2"] = None
    for p in rec.get("pieces", []):
        p["log_prefactor"] = None if p.get("log_prefactor") is None else float(_unclean(p["log_prefactor"]))
        p["alpha_range"] = [_unclean(x) for x in p["alpha_range"]]
        if p["alpha_range"][1] == math.inf:
            p["alpha_range"][1] = None
    return DecayEnvelope.from_dict(rec)


def _dump(path, doc):
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")


def _out_dir(args, cfg=None):
    out = args.out or (cfg.out if cfg is not None and cfg.out else None) or os.environ.get(OUT_ENV) or DEFAULT_OUT
    os.makedirs(out, exist_ok=True)
    return out


def _grids(cfg):
    da, dt = default_grids()
    al = da if cfg.grids.alpha is None else np.array(cfg.grids.alpha, float)
    ts = dt if cfg.grids.t is None else np.array(cfg.grids.t, float)
    return al, ts


def _kfmt(k):
    return repr(float(k))


# ---------------------------------------------------------------- commands

def cmd_certify(args):
    cfg = load_config(args.config)
    doc = certify(cfg)
    out = _out_dir(args, cfg)
    path = os.path.join(out, "certificate.json")
    _dump(path, doc)
    print(json.dumps({"command": "certify", "certificate": path, "config_hash": doc["config_hash"],
                      "envelopes": [{"kappa": e["kappa"], "tag": e["tag"], "log_prefactor": e["prefactor"]["log"]}
                                    for e in doc["envelopes"]]}, sort_keys=True))
    return 0


def cmd_validate(args):
    cfg = load_config(args.config)
    with open(args.certificate) as fh:
        cert = json.load(fh)
    h = problem_hash(cfg)
    if cert.get("config_hash") != h:
        raise HashMismatch("certificate does not match the config", expected=h,
                           found=cert.get("config_hash"))
    fam, _, _ = build_family(cfg)
    al, ts = _grids(cfg)
    tol = args.tol if args.tol is not None else cfg.tolerances.pass_tol
    out = _out_dir(args, cfg)
    results, ok = [], True
    for rec in cert["envelopes"]:
        env = envelope_from_record(rec)
        rep = validate_envelope(fam, env, al, ts, threads=args.threads)
        passed = bool(rep.max_ratio <= 1 + tol)
        ok &= passed
        path = os.path.join(out, "validate_kappa%s.csv" % _kfmt(env.kappa))
        rep.to_csv(path)
        results.append({"kappa": env.kappa, "tag": env.tag, "csv": path, "passed": passed,
                        "max_ratio": rep.max_ratio, "witness": rep.summary["witness"]})
        if args.plots:
            _plot_validation(rep, os.path.join(out, "validate_kappa%s.png" % _kfmt(env.kappa)))
    summary = {"command": "validate", "config_hash": h, "passed": ok, "tol": tol, "results": results}
    _dump(os.path.join(out, "validate_summary.json"), summary)
    print(json.dumps(_clean(summary), sort_keys=True))
    return 0 if ok else 3


def _scan_rows(cfg, fam_env, operator, xis, ts):
    rows = []
    for xi in xis:
        fam, env = fam_env(xi)
        al = xi * xi
        a = operator(xi).entries
        shift = env.rate(al)
        shifted = a + shift * np.eye(a.shape[0])
        ws = [1.0] + [operator_norm(expm(t * shifted)) for t in ts if t > 0]
        rows.append((xi, al, max(ws), env.log_value(al, 0.0), spectral_abscissa(a)))
    return rows


def cmd_scan(args):
    cfg = load_config(args.config)
    if cfg.kind not in ("rd", "bidomain"):
        raise ConfigError("scan needs an rd or bidomain config", kind=cfg.kind)
    kappa = cfg.kappas[0]
    if cfg.grids.xi is not None:
        xis = np.array(cfg.grids.xi, float)
    else:
        xis = np.linspace(0.0, 5.0, 11) if cfg.kind == "rd" else np.linspace(-5.0, 5.0, 21)
    ts = _grids(cfg)[1]
    ts = ts if cfg.grids.t is not None else np.geomspace(1e-2, 1e2, 24)
    cache = {}

    def fam_env(xi):
        br = None if cfg.kind == "rd" else ("+" if xi >= 0 else "-")
        if br not in cache:
            fam, nu, op = build_family(cfg, branch=br)
            ing = build_ingredients(fam, nu)
            cache[br] = (fam, _envelope(cfg, ing, kappa), op)
        return cache[br][:2]

    fam_env(float(xis[0]))
    operator = next(iter(cache.values()))[2]
    rows = _scan_rows(cfg, fam_env, operator, xis, ts)
    out = _out_dir(args, cfg)
    path = os.path.join(out, "scan.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write(SCAN_HEADER + "\n")
        for r in rows:
            fh.write(",".join(repr(float(x)) for x in r) + "\n")
    if args.plots:
        _plot_scan(rows, os.path.join(out, "scan.png"))
    print(json.dumps({"command": "scan", "csv": path, "rows": len(rows), "kappa": kappa,
                      "sup_weighted": max(r[2] for r in rows)}, sort_keys=True))
    return 0


def cmd_appendix(args):
    out = _out_dir(args)
    p = AppendixPayload()
    files = []
    for b0 in p.b0:
        rep = destabilization_example(b0)
        path = os.path.join(out, "destabilization_b0=%s.json" % repr(b0))
        _dump(path, rep.to_dict())
        files.append(path)
    sw = multiplication_sweep(p.sweep_b0)
    path = os.path.join(out, "multiplication_sweep_b0=%s.json" % repr(p.sweep_b0))
    _dump(path, sw.to_dict())
    files.append(path)
    print(json.dumps({"command": "appendix", "files": files}, sort_keys=True))
    return 0


def _plot_validation(rep, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = rep.rows
    pos = r[:, 4] > 0
    sc = ax.scatter(r[pos, 1], r[pos, 4], c=np.log10(np.maximum(r[pos, 0], 1e-12)), s=4)
    ax.set_xscale("symlog", linthresh=1e-3)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("measured / envelope")
    fig.colorbar(sc, label="log10 alpha")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_scan(rows, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    r = np.array(rows)
    fig, ax = plt.subplots(1, 2, figsize=(8, 3.2))
    ax[0].plot(r[:, 0], r[:, 2], "o-")
    ax[0].set_xlabel("xi")
    ax[0].set_ylabel("sup_t weighted norm")
    ax[1].plot(r[:, 0], r[:, 4], "o-")
    ax[1].set_xlabel("xi")
    ax[1].set_ylabel("spectral abscissa")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------- entry point

def make_parser():
    ap = argparse.ArgumentParser(prog="unidecay", description="Uniform decay envelopes for semigroup families.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default $%s or ./%s)" % (OUT_ENV, DEFAULT_OUT))
    common.add_argument("--plots", action="store_true", help="write static plot files (needs matplotlib)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for validation sweeps")
    common.add_argument("--tol", type=float, default=None, help="pass tolerance on measured/envelope - 1")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("certify", parents=[common], help="compute the envelope certificate")
    p.add_argument("config")
    p.set_defaults(func=cmd_certify)
    p = sub.add_parser("validate", parents=[common], help="check a certificate against direct exponentials")
    p.add_argument("config")
    p.add_argument("certificate")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("scan", parents=[common], help="wave-number sweep for rd or bidomain problems")
    p.add_argument("config")
    p.set_defaults(func=cmd_scan)
    p = sub.add_parser("appendix", parents=[common], help="destabilization examples")
    p.set_defaults(func=cmd_appendix)
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UnidecayError as exc:
        print(json.dumps(_clean(exc.to_record()), sort_keys=True))
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc), "details": {}}, sort_keys=True))
        return 2


if __name__ == "__main__":
    sys.exit(main())
