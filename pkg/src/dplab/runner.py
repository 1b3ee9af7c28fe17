"""Config-driven experiments: validation, execution, reports and replay."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction

import jsonschema

from . import hahn, padic, qe
from .formula import format_formula
from .ict import (
    BudgetError, Limits, PatternFormula, breakpoint_profile, build_inp_certificate,
    check_ict_certificate, check_inp_certificate, fuse_single_formula, refine_disjunct,
    search_ict, CertificateError,
)
from .parser import parse
from .semantics import get_structure
from .structures import PairPoint
from .vc import count_types, vc_density_profile

SCHEMA_VERSION = 1
KINDS = ("ict-search", "inp-check", "breakpoints", "vc-profile", "qe", "hahn-verify", "padic-verify")
WORKERS_ENV = "DPLAB_WORKERS"


class ConfigError(ValueError):
    pass


_PATTERN = {
    "type": "object",
    "required": ["formula"],
    "properties": {
        "formula": {"type": "string"},
        "var": {"type": "string"},
        "params": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
}

_POOL = {
    "oneOf": [
        {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
        {"type": "object", "required": ["recipe"],
         "properties": {"recipe": {"enum": ["intervals", "disjoint_intervals"]},
                        "points": {"type": "array", "items": {"type": "string"}},
                        "count": {"type": "integer", "minimum": 0}},
         "additionalProperties": False},
    ]
}


def _when(kind, required, props=None):
    then = {"required": required}
    if props:
        then["properties"] = props
    return {"if": {"properties": {"kind": {"const": kind}}}, "then": then}


CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": list(KINDS)},
        "name": {"type": "string"},
        "seed": {"type": "integer"},
        "structure": {"enum": ["simple_dlo", "pair_dlo", "qlex", "hahn", "padic"]},
        "budgets": {"type": "object", "properties": {
            "max_rows": {"type": "integer", "minimum": 1},
            "max_pool": {"type": "integer", "minimum": 0},
            "max_selections": {"type": "integer", "minimum": 1},
            "max_subsets": {"type": "integer", "minimum": 1},
            "max_k": {"type": "integer", "minimum": 1},
            "max_seconds": {"type": "number", "exclusiveMinimum": 0},
        }, "additionalProperties": False},
        "expect": {"type": "object"},
    },
    "allOf": [
        _when("ict-search", ["structure", "phi", "psi", "pool_a", "pool_b", "m", "n"],
              {"phi": _PATTERN, "psi": _PATTERN, "pool_a": _POOL, "pool_b": _POOL,
               "m": {"type": "integer", "minimum": 1}, "n": {"type": "integer", "minimum": 1},
               "fuse": {"type": "boolean"}, "refine": {"type": "boolean"}}),
        _when("inp-check", ["structure", "phi", "psi", "a_params", "b_params", "k0", "k1"],
              {"phi": _PATTERN, "psi": _PATTERN,
               "k0": {"type": "integer", "minimum": 1}, "k1": {"type": "integer", "minimum": 1}}),
        _when("breakpoints", ["structure", "sequence", "c", "delta"],
              {"sequence": {"type": "array", "minItems": 1},
               "delta": {"type": "array", "items": {"type": "string"}}}),
        _when("vc-profile", ["structure", "delta", "sizes", "recipe"],
              {"delta": {"type": "array", "items": _PATTERN},
               "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2},
               "recipe": {"enum": ["uniform_grid", "ict_families", "random"]}}),
        _when("qe", ["seed"], {"blocks": {"type": "integer", "minimum": 1},
                               "rules": {"type": "array", "items": {"enum": ["paper", "validated"]}},
                               "coords": {"type": "array", "items": {"type": "string"}}}),
        _when("hahn-verify", ["seed", "sample_size"],
              {"sample_size": {"type": "integer", "minimum": 1},
               "pairs": {"type": "integer", "minimum": 1}}),
        _when("padic-verify", ["seed"],
              {"cells": {"type": "array", "items": {
                  "type": "object", "required": ["p", "n"],
                  "properties": {"p": {"type": "integer", "minimum": 2},
                                 "n": {"type": ["integer", "null"], "minimum": 1}}}},
               "prop61": {"type": "object", "properties": {
                   "primes": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                   "ks": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                   "precision": {"type": "integer", "minimum": 1},
                   "trials": {"type": "integer", "minimum": 1}}}}),
        {"if": {"properties": {"recipe": {"const": "random"}}, "required": ["recipe"]},
         "then": {"required": ["seed"]}},
    ],
}


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {e.message}") from None
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return validate_config(cfg)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------- report


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def csv_body(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6f}"
    if v is None:
        return "-"
    return str(v)


@dataclass
class RunReport:
    config: dict
    checks: list = field(default_factory=list)      # dicts: name, passed, detail
    tables: dict = field(default_factory=dict)      # name -> Table
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def check(self, name, passed, detail=None):
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "passed": self.passed,
            "checks": self.checks,
            "tables": {k: {"columns": t.columns, "csv": t.csv_body()} for k, t in self.tables.items()},
            "details": self.details,
            "seconds": round(self.seconds, 3),
        }

    def write(self, out_dir) -> list:
        os.makedirs(out_dir, exist_ok=True)
        stem = self.config.get("name") or self.config["kind"]
        paths = [os.path.join(out_dir, f"{stem}.report.json")]
        with open(paths[0], "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=str)
            fh.write("\n")
        for tname, table in self.tables.items():
            p = os.path.join(out_dir, f"{stem}.{tname}.csv")
            with open(p, "w") as fh:
                fh.write(table.csv_body())
            paths.append(p)
        return paths

    def summary(self) -> str:
        lines = [f"{self.config['kind']} ({self.config.get('name', '-')}): "
                 f"{'PASS' if self.passed else 'FAIL'} in {self.seconds:.2f}s"]
        for c in self.checks:
            lines.append(f"  [{'pass' if c['passed'] else 'FAIL'}] {c['name']}"
                         + (f": {c['detail']}" if c["detail"] not in (None, "") else ""))
        return "\n".join(lines)


# ---------------------------------------------------------------- helpers


def _limits(cfg):
    b = cfg.get("budgets", {})
    d = Limits()
    return Limits(b.get("max_rows", d.max_rows), b.get("max_pool", d.max_pool),
                  b.get("max_selections", d.max_selections), b.get("max_subsets", d.max_subsets))


def _pattern(struct, spec):
    return PatternFormula(parse(spec["formula"], struct.signature), spec.get("var", "x"),
                          tuple(spec.get("params", ["y1", "y2"])))


def _pool(struct, spec):
    read = struct.parse_element
    if isinstance(spec, list):
        return [tuple(read(e) for e in row) for row in spec]
    if spec["recipe"] == "intervals":
        pts = sorted(read(p) for p in spec.get("points", []))
        return [(a, b) for i, a in enumerate(pts) for b in pts[i + 1:]]
    k = spec.get("count", 0)
    if struct.name == "pair_dlo":
        return [(PairPoint(2 * i, 2 * i), PairPoint(2 * i + 1, 2 * i + 1)) for i in range(k)]
    return [(Fraction(2 * i), Fraction(2 * i + 1)) for i in range(k)]


def _elem(struct, v):
    if isinstance(v, list):
        return tuple(struct.parse_element(e) for e in v)
    return struct.parse_element(v)


# ---------------------------------------------------------------- experiments


def _ict_search(cfg, rep, workers):
    struct = get_structure(cfg["structure"])
    phi, psi = _pattern(struct, cfg["phi"]), _pattern(struct, cfg["psi"])
    pool_a, pool_b = _pool(struct, cfg["pool_a"]), _pool(struct, cfg["pool_b"])
    m, n = cfg["m"], cfg["n"]
    cert = search_ict(struct, phi, psi, pool_a, pool_b, m, n, limits=_limits(cfg), workers=workers)
    table = rep.tables["ict"] = Table(["structure", "m", "n", "pool_a", "pool_b", "result",
                                       "valid", "type_count"])
    expect = cfg.get("expect", {})
    if cert is None:
        table.rows.append([struct.name, m, n, len(pool_a), len(pool_b), "absent (exhaustive)", None, None])
    else:
        valid = check_ict_certificate(cert)
        rep.check("certificate valid", valid)
        inst = [(phi, a) for a in cert.a_params] + [(psi, b) for b in cert.b_params]
        count = count_types(struct, phi.var, inst).count
        rep.check("type count >= m*n", count >= m * n, f"{count} >= {m * n}")
        table.rows.append([struct.name, m, n, len(pool_a), len(pool_b), "found", valid, count])
        rep.details["certificate"] = cert.to_dict()
        if cfg.get("fuse"):
            fused = fuse_single_formula(cert)
            ok = check_ict_certificate(fused)
            rep.check("fused certificate valid", ok, f"{fused.shape[0]}x{fused.shape[1]}")
            rep.details["fused"] = fused.to_dict()
            table.columns.append("fused_shape")
            table.rows[-1].append(f"{fused.shape[0]}x{fused.shape[1]}")
        if cfg.get("refine"):
            try:
                ref = refine_disjunct(cert)
            except CertificateError as e:
                rep.check("refinement", False, str(e))
            else:
                ok = check_ict_certificate(ref.certificate)
                rep.check("refined certificate valid", ok, f"l*={ref.index}, rows={ref.rows}")
                rep.details["refinement"] = {"index": ref.index, "rows": ref.rows, "note": ref.note,
                                             "certificate": ref.certificate.to_dict()}
                table.columns += ["refine_index", "rows_kept"]
                table.rows[-1] += [ref.index, len(ref.rows)]
                if "refine_index" in expect:
                    rep.check("refine index", ref.index == expect["refine_index"], ref.index)
                if expect.get("refine_all_rows"):
                    rep.check("all rows retained", len(ref.rows) == m, len(ref.rows))
    if "result" in expect:
        got = "absent" if cert is None else "found"
        rep.check(f"result is {expect['result']}", got == expect["result"], got)


def _inp_check(cfg, rep, workers):
    struct = get_structure(cfg["structure"])
    phi, psi = _pattern(struct, cfg["phi"]), _pattern(struct, cfg["psi"])
    a = [tuple(struct.parse_element(e) for e in r) for r in cfg["a_params"]]
    b = [tuple(struct.parse_element(e) for e in r) for r in cfg["b_params"]]
    cert = build_inp_certificate(struct, phi, psi, a, b, cfg["k0"], cfg["k1"])
    valid = cert is not None and check_inp_certificate(cert, limits=_limits(cfg))
    rep.tables["inp"] = Table(["structure", "m", "n", "k0", "k1", "valid", "subsets_checked"],
                              [[struct.name, len(a), len(b), cfg["k0"], cfg["k1"], valid,
                                cert.subsets_checked if cert else 0]])
    want = cfg.get("expect", {}).get("valid")
    if want is not None:
        rep.check(f"certificate valid is {want}", valid == want, valid)


def _breakpoints(cfg, rep, workers):
    struct = get_structure(cfg["structure"])
    seq = [_elem(struct, v) for v in cfg["sequence"]]
    c = _elem(struct, cfg["c"])
    delta = [parse(d, struct.signature) for d in cfg["delta"]]
    prof = breakpoint_profile(struct, seq, c, delta, tuple_vars=tuple(cfg.get("tuple_vars", ["x"])),
                              elem_var=cfg.get("elem_var", "c"))
    t = rep.tables["breakpoints"] = Table(["block", "start", "stop", "fingerprint"])
    for i, ((s, e), fp) in enumerate(zip(prof.blocks, prof.fingerprints)):
        t.rows.append([i, s, e, "".join("1" if b else "0" for b in fp)])
    if "blocks" in cfg.get("expect", {}):
        want = [tuple(x) for x in cfg["expect"]["blocks"]]
        rep.check("block boundaries", prof.blocks == want, prof.blocks)


def _vc_profile(cfg, rep, workers):
    struct = get_structure(cfg["structure"])
    delta = [_pattern(struct, d) for d in cfg["delta"]]
    prof = vc_density_profile(struct, delta, cfg["sizes"], recipe=cfg["recipe"], seed=cfg.get("seed", 0))
    delta_id = cfg.get("delta_id", "|".join(format_formula(d.formula) for d in delta) or "empty")
    t = rep.tables["vc"] = Table(["structure", "delta_id", "size", "exact_count", "fitted_slope"])
    for size, count in zip(prof.sizes, prof.counts):
        t.rows.append([struct.name, delta_id, size, count, prof.slope])
    rep.details["residuals"] = [round(r, 9) for r in prof.residuals]
    rep.details["max_count_over_size"] = prof.max_ratio
    expect = cfg.get("expect", {})
    if "counts" in expect:
        rep.check("exact counts", prof.counts == expect["counts"], prof.counts)
    if "slope" in expect:
        lo, hi = expect["slope"] - expect.get("tolerance", 0.15), expect["slope"] + expect.get("tolerance", 0.15)
        rep.check(f"slope in [{lo:.2f}, {hi:.2f}]", lo <= prof.slope <= hi, f"{prof.slope:.4f}")


def _qe(cfg, rep, workers):
    coords = tuple(Fraction(c) for c in cfg.get("coords", ["-1", "0", "1"]))
    rules = tuple(cfg.get("rules", ["validated", "paper"]))
    blocks = qe.qe_corpus(cfg.get("blocks", 500), cfg["seed"], coords=coords)
    reports = qe.validate_corpus(blocks, rules, coords, workers=workers)
    t = rep.tables["qe"] = Table(["rule", "blocks", "checks", "disagreements", "disagreeing_blocks"])
    recorded = str(qe.RECORDED_INSTANCE)
    for r in rules:
        vr = reports[r]
        bad_blocks = sorted({d.block for d in vr.disagreements})
        t.rows.append([r, vr.blocks, vr.checks, len(vr.disagreements), len(bad_blocks)])
        rep.details[f"{r}_disagreements"] = [d.__dict__ for d in vr.disagreements[:50]]
        if r == "validated":
            rep.check("validated rule agrees with oracle", vr.ok, f"{len(vr.disagreements)} disagreements")
        if r == "paper":
            hit = recorded in bad_blocks
            rep.check("paper rule disagreement report non-empty", not vr.ok,
                      f"{len(vr.disagreements)} disagreements on {len(bad_blocks)} blocks")
            rep.check("paper report includes the recorded boundary-column instance", hit, recorded)


def _hahn_verify(cfg, rep, workers):
    seed, n = cfg["seed"], cfg["sample_size"]
    pairs = cfg.get("pairs", n)
    lemma = hahn.lemma51_suite(seed, pairs)
    axioms = hahn.axiom_suite(seed, n)
    rn = hahn.rn_agreement(seed, pairs)
    t = rep.tables["hahn"] = Table(["check", "passed", "total"])
    for name, rpt in (("lemma51", lemma), ("axioms", axioms), ("rn_oracle", rn)):
        for check, (p, tot) in sorted(rpt.checks.items()):
            t.rows.append([f"{name}:{check}", p, tot])
    rep.check("class-of-sum clauses", lemma.ok, f"{len(lemma.failures)} violations")
    for ax in ("axiom2", "axiom3", "axiom5", "axiom5'", "axiom6", "axiom7", "axiom8", "axiom8'",
               "axiom1", "axiom4"):
        p, tot = axioms.checks.get(ax, (0, 0))
        rep.check(f"{ax} ({tot} instances)", p == tot and tot > 0)
    rep.check("compute_Rn matches chain search", rn.ok, f"{len(rn.failures)} mismatches")
    rep.details["failures"] = [str(f) for f in (lemma.failures + axioms.failures + rn.failures)[:20]]


def _padic_verify(cfg, rep, workers):
    max_k = cfg.get("budgets", {}).get("max_k", 12)
    expect = cfg.get("expect", {})
    cells = cfg.get("cells", [])
    if cells:
        t = rep.tables["celllike"] = Table(["p", "n", "derived_k", "verified_modulus",
                                            "violations_at_k_minus_1"])
        for c in cells:
            try:
                r = padic.find_celllike_k(c["p"], c["n"], max_k=max_k)
            except padic.BoundExhausted as e:
                raise BudgetError(str(e)) from None
            t.rows.append([r.p, r.n if c["n"] is not None else "annulus", r.k, r.verified_modulus,
                           r.violations_at_k_minus_1])
            if c["n"] is not None and r.k > 1:
                rep.check(f"k({r.p},{r.n})={r.k} minimal", r.violations_at_k_minus_1 > 0,
                          f"{r.violations_at_k_minus_1} pairs split at k-1")
            elif c["n"] is not None:
                rep.check(f"k({r.p},{r.n})=1 minimal", True, "least admissible k")
        for key, want in expect.get("k", {}).items():
            p, n = (int(s) for s in key.split(","))
            got = next((row[2] for row in t.rows if row[0] == p and row[1] == n), None)
            rep.check(f"k({p},{n}) == {want}", got == want, got)
    if "prop61" in cfg:
        s = cfg["prop61"]
        rows = padic.prop61_suite(tuple(s.get("primes", [2, 3, 5])), tuple(s.get("ks", [1, 2, 3, 4])),
                                  s.get("precision", 12), s.get("trials", 10_000), cfg["seed"])
        t = rep.tables["prop61"] = Table(["p", "k", "decidable", "passed", "undecided"], [list(r) for r in rows])
        bad = [(r[0], r[1]) for r in rows if r[2] != r[3]]
        rep.check("pi_k biconditional on every decidable triple", not bad, bad or None)


RUNNERS = {
    "ict-search": _ict_search, "inp-check": _inp_check, "breakpoints": _breakpoints,
    "vc-profile": _vc_profile, "qe": _qe, "hahn-verify": _hahn_verify, "padic-verify": _padic_verify,
}


def run(cfg: dict, workers: int | None = None) -> RunReport:
    """Execute a validated config.  Raises ConfigError or BudgetError."""
    validate_config(cfg)
    workers = default_workers() if workers is None else workers
    rep = RunReport(cfg)
    t0 = time.perf_counter()
    RUNNERS[cfg["kind"]](cfg, rep, workers)
    rep.seconds = time.perf_counter() - t0
    limit = cfg.get("budgets", {}).get("max_seconds")
    if limit is not None:
        rep.check(f"runtime under {limit}s", rep.seconds < limit, f"{rep.seconds:.2f}s")
    return rep


class CorruptReport(ValueError):
    pass


def replay(report_path, workers: int | None = None):
    """Re-run the echoed config; returns (fresh RunReport, list of diffs)."""
    try:
        with open(report_path) as fh:
            old = json.load(fh)
        cfg = old["config"]
        old_tables = {k: v["csv"] for k, v in old["tables"].items()}
    except (OSError, json.JSONDecodeError, KeyError, TypeError, AttributeError) as e:
        raise CorruptReport(f"cannot replay {report_path}: {e}") from None
    fresh = run(cfg, workers)
    diffs = []
    for name in sorted(set(old_tables) | set(fresh.tables)):
        if name not in fresh.tables:
            diffs.append(f"table {name}: missing from replay")
            continue
        if name not in old_tables:
            diffs.append(f"table {name}: new in replay")
            continue
        a, b = old_tables[name].splitlines(), fresh.tables[name].csv_body().splitlines()
        for i in range(max(len(a), len(b))):
            la = a[i] if i < len(a) else "<none>"
            lb = b[i] if i < len(b) else "<none>"
            if la != lb:
                diffs.append(f"table {name} line {i + 1}: {la!r} != {lb!r}")
    return fresh, diffs
