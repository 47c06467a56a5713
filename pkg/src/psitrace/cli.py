"""Command-line driver.

Every command writes JSON Lines: one :class:`RunRecord` per line, keys
sorted, floats in round-trip precision.  ``--out`` appends to a file,
otherwise records go to stdout.  Exit codes: 0 all checks pass, 1 a check
failed or a numerical guard tripped, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from . import band1d, closedform, fem, mesh as meshmod, profile, verify
from .closedform import DomainSpec, EigenmodeRecord

SCHEMA_VERSION = 1

# required payload keys per record kind
PAYLOAD_KEYS = {
    "eigenmode": {"domain", "indices", "lambda", "psi_norm_sq", "ratio", "provenance"},
    "ratio_summary": {"domain", "lambda_window", "min_ratio", "max_ratio", "count"},
    "profile_summary": {"label", "lambda", "delta", "E0", "half_psi_norm_sq", "energy_const", "l_bound_const", "diff_ineq_const"},
    "band_row": {"l", "lambda", "psi_norm_sq", "audit", "family", "transverse_index"},
    "band_audit": {"top_decade_max_over_min", "log_psi_slope", "log_psi_correlation", "family"},
    "verification": {"check", "target", "value", "tolerance", "passed"},
}


class UsageError(ValueError):
    pass


@dataclass
class RunRecord:
    command: str
    kind: str
    payload: dict
    domain: dict | None = None
    tolerances: dict = field(default_factory=dict)
    timestamp: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        if self.kind not in PAYLOAD_KEYS:
            raise ValueError(f"unknown record kind {self.kind!r}")
        missing = PAYLOAD_KEYS[self.kind] - set(self.payload)
        if missing:
            raise ValueError(f"{self.kind} payload lacks {sorted(missing)}")

    def to_json(self) -> str:
        d = {
            "schema_version": self.schema_version,
            "timestamp": self.timestamp,
            "command": self.command,
            "kind": self.kind,
            "domain": self.domain,
            "payload": self.payload,
            "tolerances": self.tolerances,
        }
        return json.dumps(d, sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        d = json.loads(line)
        if "schema_version" not in d:
            raise ValueError("record has no schema_version")
        return cls(
            command=d["command"],
            kind=d["kind"],
            payload=d["payload"],
            domain=d.get("domain"),
            tolerances=d.get("tolerances") or {},
            timestamp=d.get("timestamp"),
            schema_version=d["schema_version"],
        )


def read_records(path) -> list[RunRecord]:
    with open(path) as fh:
        return [RunRecord.from_json(line) for line in fh if line.strip()]


def load_config(path=None) -> dict:
    cfg = json.loads(resources.files("psitrace").joinpath("defaults.json").read_text())
    if path:
        with open(path) as fh:
            user = json.load(fh)
        tol = {**cfg["tolerances"], **user.pop("tolerances", {})}
        unknown = set(tol) - set(cfg["tolerances"])
        if unknown:
            raise UsageError(f"unknown tolerance keys {sorted(unknown)}")
        cfg.update(user)
        cfg["tolerances"] = tol
    return cfg


def parse_range(text: str) -> list[int]:
    """Index list: ``3``, ``0..10`` (inclusive), ``1,4,7`` or mixes like ``1..3,9``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = (int(x) for x in part.split(".."))
                out.extend(range(lo, hi + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad index range {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError(f"index range {text!r} is empty")
    return out


class _Writer:
    def __init__(self, args, cfg):
        self.path = args.out
        self.stamp = None if args.no_timestamp else datetime.now(timezone.utc).isoformat()
        self.command = args.command
        self.cfg = cfg
        self.lines: list[str] = []
        self.failed = 0

    def emit(self, kind, payload, domain=None, tolerances=None):
        rec = RunRecord(self.command, kind, payload, domain, tolerances or {}, self.stamp)
        if kind == "verification" and not payload["passed"]:
            self.failed += 1
        self.lines.append(rec.to_json())
        return rec

    def check(self, check, target, value, tol_key, domain=None, upper=True, extra=None):
        tol = self.cfg["tolerances"][tol_key]
        ok = bool(np.isfinite(value) and (value <= tol if upper else value >= tol))
        payload = {"check": check, "target": target, "value": float(value), "tolerance": tol, "passed": ok}
        payload.update(extra or {})
        return self.emit("verification", payload, domain, {tol_key: tol})

    def flush(self):
        text = "".join(line + "\n" for line in self.lines)
        if self.path:
            with open(self.path, "a") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


# ---------------------------------------------------------------- modes

def _domain_from_args(args) -> DomainSpec:
    kind = args.domain
    if kind == "disc":
        return closedform.disc(args.radius)
    if kind in ("rectangle", "cylinder"):
        if args.a is None or args.b is None:
            raise UsageError(f"--domain {kind} needs --a and --b")
        return closedform.rectangle(args.a, args.b) if kind == "rectangle" else closedform.flat_cylinder(args.a, args.b)
    if kind == "hemisphere":
        return closedform.hemisphere()
    if kind == "neumann_disc":
        return closedform.neumann_disc()
    raise UsageError(f"unknown domain {kind}")


def _index_tuples(args, kind):
    need = {"disc": ("n", "k"), "neumann_disc": ("n", "k"), "rectangle": ("m", "n"), "cylinder": ("m", "n"), "hemisphere": ("l",)}[kind]
    given = {name for name in ("n", "k", "m", "l") if getattr(args, name) is not None}
    if given != set(need):
        raise UsageError(f"--domain {kind} takes exactly the index flags {', '.join('--' + x for x in need)}")
    lists = [getattr(args, name) for name in need]
    if len(lists) == 1:
        return [(i,) for i in lists[0]]
    return [(i, j) for i in lists[0] for j in lists[1]]


def cmd_modes(args, w: _Writer):
    dom = _domain_from_args(args)
    records = []
    for idx in _index_tuples(args, args.domain):
        try:
            records.append(closedform.mode_from_indices(dom, idx))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    records.sort(key=lambda r: (r.lam, r.indices))
    for r in records:
        w.emit("eigenmode", r.to_dict(), dom.to_dict())


# ---------------------------------------------------------------- verify

CHECKS = ("rellich", "sobolev", "ozawa", "profile")


def _trace_for(rec: EigenmodeRecord):
    d = rec.domain
    if d.kind == "disc":
        n, k = rec.indices
        return verify.disc_trace(d.a, n, k, nodes=max(512, 4 * n + 64))
    if d.kind == "rectangle":
        m, n = rec.indices
        return verify.rectangle_trace(d.a, d.b, m, n)
    return None


def _verify_rellich(recs, w):
    for r in recs:
        trace = _trace_for(r) if r.provenance == "closed-form" else None
        if trace is None:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = verify.rellich_check(r.domain, r, trace)
        w.check("rellich", list(r.indices), res, "rellich_closed_form", r.domain.to_dict())


def _verify_sobolev(recs, w):
    by_domain: dict = {}
    for r in recs:
        if r.domain.kind != "disc" or r.provenance != "closed-form":
            continue
        trace = _trace_for(r)
        h = [verify.boundary_sobolev_norm(trace, k) / r.lam ** (k + 1) for k in range(3)]
        dev = abs(h[0] * r.lam - r.psi_norm_sq) / r.psi_norm_sq
        w.check("sobolev", list(r.indices), dev, "trace_consistency", r.domain.to_dict(),
                extra={"h0_over_lambda": h[0], "h1_over_lambda2": h[1], "h2_over_lambda3": h[2]})
        by_domain.setdefault(json.dumps(r.domain.to_dict(), sort_keys=True), []).append((r.lam, h))
    for key, rows in sorted(by_domain.items()):
        dom = DomainSpec.from_dict(json.loads(key))
        rows = _complete_prefix(dom, rows)
        lam = np.array([x[0] for x in rows])
        if len(rows) < 2 or lam.max() / lam.min() < 10:
            continue
        worst = 0.0
        for k in range(3):
            q = np.array([x[1][k] for x in rows])
            edges = np.geomspace(lam.max() / 10, lam.max() * (1 + 1e-12), 11)
            maxima = [q[(lam >= lo) & (lam < hi)].max() for lo, hi in zip(edges[:-1], edges[1:]) if ((lam >= lo) & (lam < hi)).any()]
            worst = max(worst, max(maxima) / float(np.median(maxima)))
        w.check("sobolev_trend", "top decade", worst, "sobolev_trend", json.loads(key),
                extra={"complete_below": float(lam.max()), "modes": len(rows)})


def _complete_prefix(dom, rows):
    """Rows below the first disc mode missing from the catalogue.

    A growth trend is only meaningful over a full enumeration.
    """
    have = {round(x[0], 9) for x in rows}
    cut = math.inf
    for r in closedform.disc_modes_below(dom.a, max(x[0] for x in rows) * (1 + 1e-12)):
        if round(r.lam, 9) not in have:
            cut = r.lam
            break
    return [x for x in rows if x[0] < cut]


def _verify_ozawa(recs, w):
    lam_max = w.cfg["ozawa_lambda_max"]
    seen = {}
    for r in recs:
        if r.domain.kind in ("disc", "rectangle"):
            seen[json.dumps(r.domain.to_dict(), sort_keys=True)] = r.domain
    for key, dom in sorted(seen.items()):
        y = (dom.a, 0.0) if dom.kind == "disc" else (dom.a / 2, 0.0)
        emp, lead = verify.ozawa_sum(dom, lam_max, y)
        _, dev = verify.weyl_guard(dom, lam_max, w.cfg["tolerances"]["weyl_guard"])
        w.check("weyl_guard", list(y), dev, "weyl_guard", dom.to_dict())
        w.check("ozawa", list(y), abs(emp / lead - 1), "ozawa_band", dom.to_dict(),
                extra={"empirical": emp, "leading": lead, "lambda_max": lam_max})


def _verify_profile(recs, w):
    frac = w.cfg["profile_delta_fraction"]
    pts = w.cfg["profile_points"]
    groups: dict = {}
    for r in recs:
        d = r.domain
        if r.provenance != "closed-form" or d.kind not in ("disc", "hemisphere"):
            continue
        delta = frac * (d.a if d.kind == "disc" else math.pi / 2)
        p = profile.collar_profile(d, r, np.linspace(0.0, delta, pts))
        dev = abs(p.E_values[0] - 0.5 * r.psi_norm_sq) / (0.5 * r.psi_norm_sq)
        w.check("energy_identity", list(r.indices), dev, "energy_identity", d.to_dict())
        groups.setdefault(json.dumps(d.to_dict(), sort_keys=True), []).append(p)
    for key, profs in sorted(groups.items()):
        lam = np.array([p.lam for p in profs])
        if lam.max() / lam.min() < 100:
            continue
        top = [p for p in profs if p.lam >= lam.max() / 10]
        bottom = [p for p in profs if p.lam <= lam.min() * 10]
        for name, fn in (("energy_uniformity", profile.energy_bound_audit),
                         ("l_bound_uniformity", profile.l_bound_audit),
                         ("diff_ineq_uniformity", lambda ps: max(profile.diff_ineq_audit(p) for p in ps))):
            w.check(name, "top/bottom decade", fn(top) / fn(bottom), "profile_uniformity", json.loads(key))


def cmd_verify(args, w: _Writer):
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    bad = [c for c in checks if c not in CHECKS]
    if bad or not checks:
        raise UsageError(f"unknown check(s) {bad}; choose from {', '.join(CHECKS)}")
    try:
        recs = [EigenmodeRecord.from_dict(r.payload) for r in read_records(args.input) if r.kind == "eigenmode"]
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc
    if not recs:
        raise UsageError(f"{args.input} holds no eigenmode records")
    recs.sort(key=lambda r: (r.lam, r.indices))
    for c in checks:
        {"rellich": _verify_rellich, "sobolev": _verify_sobolev, "ozawa": _verify_ozawa, "profile": _verify_profile}[c](recs, w)


# ---------------------------------------------------------------- fem

def cmd_fem(args, w: _Writer):
    poly = meshmod.read_polygon(args.polygon)
    dom = fem.polygon_domain(poly)
    m = meshmod.mesh_polygon(poly, args.h)
    if args.jitter:
        m = jitter_mesh(m, args.jitter, args.seed)
    guard = w.cfg["tolerances"]["fem_guard"]
    refinements = 0
    while True:
        pairs = fem.solve_eigs(m, args.count)
        if not args.audit or pairs[-1].lambda_h * m.h**2 <= guard:
            break
        if args.strict_guard or refinements >= w.cfg["fem_max_refinements"]:
            raise fem.ResolutionError(
                f"lambda_max * h^2 = {pairs[-1].lambda_h * m.h**2:.3g} exceeds {guard}")
        m = meshmod.refine_uniform(m)
        refinements += 1
    if args.mesh_out:
        meshmod.write_mesh(m, args.mesh_out)
    meta = {"h": m.h, "vertices": len(m.vertices), "refinements": refinements}
    for i, p in enumerate(pairs):
        rec = EigenmodeRecord(dom, (i + 1,), p.lambda_h, fem.flux_norm_sq(m, p), provenance="fem")
        w.emit("eigenmode", {**rec.to_dict(), **meta, "residual": p.residual}, dom.to_dict())
    if args.audit:
        summary, clusters = fem.bounds_audit(m, domain=dom, guard=guard, pairs=pairs)
        w.emit("ratio_summary", {**summary.to_dict(), **meta}, dom.to_dict(), {"fem_guard": guard})
        for rec, p in zip(clusters, _cluster_heads(pairs, clusters)):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = verify.rellich_check(dom, EigenmodeRecord(dom, rec.indices, p.lambda_h, rec.psi_norm_sq, "fem"),
                                           fem.recover_flux(m, p))
            w.check("rellich", list(rec.indices), res, "rellich_fem", dom.to_dict())


def _cluster_heads(pairs, clusters):
    return [pairs[rec.indices[0] - 1] for rec in clusters]


def jitter_mesh(m: meshmod.Mesh, fraction: float, seed: int):
    """Move interior vertices by up to ``fraction`` * h (seeded); used for robustness tests."""
    rng = np.random.default_rng(seed)
    v = m.vertices.copy()
    inner = m.interior_vertices
    v[inner] += rng.uniform(-fraction, fraction, size=(len(inner), 2)) * m.h
    return meshmod._finish(v, m.triangles)


# ---------------------------------------------------------------- band

def cmd_band(args, w: _Writer):
    ls = args.l
    family = args.family or band1d.default_family(args.curvature)
    modes = band1d.band_sweep(args.curvature, args.a, ls, family=family, grid_size=args.grid or w.cfg["band_grid"])
    dom = DomainSpec("band", a=args.a, params={"curvature": args.curvature}).to_dict()
    audit = band1d.trapping_scaling_audit(modes)
    for m, row in zip(modes, audit["rows"]):
        w.emit("band_row", {**row, "log_psi_norm_sq": math.log(row["psi_norm_sq"]), "family": family,
                            "transverse_index": m.transverse_index, "lambda_disagreement": m.lam_disagreement}, dom)
    if args.audit:
        w.emit("band_audit", {k: v for k, v in audit.items() if k != "rows"}, dom)


# ---------------------------------------------------------------- profile

def cmd_profile(args, w: _Writer):
    pts = args.points or w.cfg["profile_points"]
    frac = args.delta_fraction or w.cfg["profile_delta_fraction"]
    jobs = []
    if args.domain == "band":
        if args.curvature is None or args.l is None:
            raise UsageError("--domain band needs --curvature and --l")
        fam = args.family or band1d.default_family(args.curvature)
        dom = DomainSpec("band", a=args.a or 1.0, params={"curvature": args.curvature})
        for l in args.l:
            mode = band1d.family_mode(band1d.BandSpec(args.curvature, dom.a, l, w.cfg["band_grid"]), fam)
            jobs.append((dom, mode, frac * dom.a))
    else:
        dom = _domain_from_args(args)
        span = {"disc": dom.a, "hemisphere": math.pi / 2, "rectangle": (dom.a or 1) / 2}.get(args.domain)
        if span is None:
            raise UsageError(f"no collar model for {args.domain}")
        for idx in _index_tuples(args, args.domain):
            jobs.append((dom, closedform.mode_from_indices(dom, idx), frac * span))
    for dom, mode, delta in jobs:
        p = profile.collar_profile(dom, mode, np.linspace(0.0, delta, pts))
        payload = {
            **p.summary(),
            "energy_const": profile.energy_bound_audit([p]),
            "l_bound_const": profile.l_bound_audit([p]),
            "diff_ineq_const": profile.diff_ineq_audit(p),
        }
        if args.csv_dir:
            name = "".join(ch if ch.isalnum() else "_" for ch in p.label).strip("_")
            path = f"{args.csv_dir}/profile_{name}.csv"
            p.to_csv(path)
            payload["csv"] = path
        w.emit("profile_summary", payload, dom.to_dict())


# ---------------------------------------------------------------- report

def cmd_report(args, w: _Writer):
    try:
        recs = read_records(args.input)
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc
    by_kind: dict = {}
    for r in recs:
        by_kind.setdefault(r.kind, []).append(r)
    for kind in sorted(by_kind):
        rows = by_kind[kind]
        line = f"{kind}: {len(rows)} records"
        if kind == "verification":
            failed = [r for r in rows if not r.payload["passed"]]
            line += f", {len(failed)} failed"
            w.failed += len(failed)
        if kind == "eigenmode":
            ratios = [r.payload["ratio"] for r in rows]
            line += f", ratio range [{min(ratios):.6g}, {max(ratios):.6g}]"
        print(line)
        if args.csv_dir:
            keys = sorted({k for r in rows for k, v in r.payload.items() if not isinstance(v, (dict, list))})
            with open(f"{args.csv_dir}/{kind}.csv", "w", newline="") as fh:
                cw = csv.writer(fh)
                cw.writerow(keys)
                for r in rows:
                    cw.writerow([r.payload.get(k, "") for k in keys])


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="append records to this file (default: stdout)")
    common.add_argument("--config", help="JSON file overriding defaults.json")
    common.add_argument("--no-timestamp", action="store_true", help="omit timestamps for byte-identical reruns")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized mesh perturbation")

    p = argparse.ArgumentParser(prog="psitrace", description="Boundary traces of Dirichlet eigenfunctions.")
    sub = p.add_subparsers(dest="command", required=True)

    def domain_flags(sp, domains):
        sp.add_argument("--domain", required=True, choices=domains)
        sp.add_argument("--radius", type=float, default=1.0)
        sp.add_argument("--a", type=float)
        sp.add_argument("--b", type=float)
        for name in ("n", "k", "m", "l"):
            sp.add_argument(f"--{name}", type=parse_range, help="index range, e.g. 0..10 or 1,3,5")

    sp = sub.add_parser("modes", parents=[common], help="closed-form eigenmode catalogue")
    domain_flags(sp, ["disc", "rectangle", "cylinder", "hemisphere", "neumann_disc"])
    sp.set_defaults(func=cmd_modes)

    sp = sub.add_parser("verify", parents=[common], help="numerical checks on eigenmode records")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--checks", default="rellich", help=f"comma list from {', '.join(CHECKS)}")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("fem", parents=[common], help="finite-element eigenpairs of a polygon")
    sp.add_argument("--polygon", required=True, help="file of 'x y' vertex lines")
    sp.add_argument("--h", type=float, required=True, help="target max edge length")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--audit", action="store_true", help="emit ratio summary and Rellich checks")
    sp.add_argument("--strict-guard", action="store_true", help="fail instead of refining when lambda h^2 is too large")
    sp.add_argument("--jitter", type=float, default=0.0, help="perturb interior vertices by this fraction of h")
    sp.add_argument("--mesh-out")
    sp.set_defaults(func=cmd_fem)

    sp = sub.add_parser("band", parents=[common], help="sweep of band modes over the angular index")
    sp.add_argument("--curvature", required=True, choices=sorted(band1d.WEIGHTS))
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--l", "--l-range", dest="l", type=parse_range, required=True)
    sp.add_argument("--family", choices=["ground", "barrier"])
    sp.add_argument("--grid", type=int)
    sp.add_argument("--audit", action="store_true")
    sp.set_defaults(func=cmd_band)

    sp = sub.add_parser("profile", parents=[common], help="collar profiles E(r), L(r)")
    domain_flags(sp, ["disc", "rectangle", "hemisphere", "band"])
    sp.add_argument("--curvature", choices=sorted(band1d.WEIGHTS))
    sp.add_argument("--family", choices=["ground", "barrier"])
    sp.add_argument("--points", type=int)
    sp.add_argument("--delta-fraction", type=float)
    sp.add_argument("--csv-dir")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("report", parents=[common], help="summarize a record file, optionally as CSV")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--csv-dir")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        w = _Writer(args, cfg)
        args.func(args, w)
    except (UsageError, meshmod.MeshError, OSError, json.JSONDecodeError) as exc:
        print(f"psitrace {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (fem.ResolutionError, fem.ConvergenceError, band1d.GridTooCoarse) as exc:
        print(f"psitrace {args.command}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"psitrace {args.command}: error: {exc}", file=sys.stderr)
        return 2
    w.flush()
    if w.failed:
        print(f"psitrace {args.command}: {w.failed} check(s) failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
