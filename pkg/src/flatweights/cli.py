"""Command line: ``constants``, ``verify`` and ``sweep``.

Exit codes: 0 when every evaluated check passes, 1 when any fails, 2 on
usage or input errors.

Sweep CSV columns (frozen, schema ``v:1``), one row per delta::

    delta, fw_minus_1, hruscev_minus_1, bmo, bmo_w, jn_r_star, embed_p,
    a_p_at_embed_p, doubling, p_star_w, implied_c_tsutsui, implied_kappa,
    implied_C_bmo, implied_c_ps

followed by one ``pass_<id>`` column per requested check.  ``p_star_w`` and
``implied_c_ps`` (Poincare-Sobolev with ``f = x_1`` on the unit cube,
``p = 1``) are empty for ``n = 1``.  Infinite values print as ``inf``.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import constants as K
from . import io as gio
from .errors import FlatWeightsError, NoAdmissibleCube
from .families import Kind, delta_grid, generate, parse_spec
from .grid import CubeFamily, DoubleMode, GridFn, GridSpec, Weight
from .sobolev import check_poincare_sobolev, sobolev_exponent
from .verify import CHECKS, VerifyParams, check_doubling_bound, parse_check_ids, run_checks

SCHEMA_VERSION = 1

SWEEP_COLUMNS = [
    "delta",
    "fw_minus_1",
    "hruscev_minus_1",
    "bmo",
    "bmo_w",
    "jn_r_star",
    "embed_p",
    "a_p_at_embed_p",
    "doubling",
    "p_star_w",
    "implied_c_tsutsui",
    "implied_kappa",
    "implied_C_bmo",
    "implied_c_ps",
]


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, choices=(1, 2), default=1, help="dimension (default 1)")
    p.add_argument("--L", type=int, default=6, help="grid level, 2**L cells per side (default 6)")
    p.add_argument(
        "--family",
        default="dyadic",
        help="dyadic | aligned | aligned:a,b (plain 'aligned' uses the default strides)",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--weight", help="generator spec kind:key=val,... (power, flat, step, random)")
    src.add_argument("--weight-file", help="CSV or JSON grid file")
    p.add_argument("--p", type=_floats, default=(2.0,), help="comma-separated exponents (default 2)")
    p.add_argument(
        "--mode",
        choices=[m.value for m in DoubleMode],
        default=DoubleMode.REQUIRE_INSIDE.value,
        help="how doubled cubes meet the boundary",
    )
    p.add_argument("--out", help="write the report here instead of stdout")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")


def _check_params(p: argparse.ArgumentParser, checks_default: str | None) -> None:
    p.add_argument("--checks", default=checks_default, help=f"ids from: {','.join(CHECKS)}")
    p.add_argument("--tau", type=float, help="embedding exponent constant (default: calibrated)")
    p.add_argument("--tau-prime", type=float, help="embedding bound constant (default: calibrated)")
    p.add_argument("--kappa", type=float, default=1.0, help="doubling constant budget (default 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flatweights", description="Weight constants and inequality checks on dyadic grids.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    c = sub.add_parser("constants", help="all weight constants for one weight")
    _common(c)
    c.add_argument("--bound", type=float, default=K.LOG_BOUND_DEFAULT, help="exponential-average bound for r*")
    v = sub.add_parser("verify", help="run inequality checks on one weight")
    _common(v)
    _check_params(v, None)
    s = sub.add_parser("sweep", help="tabulate a weight family over delta")
    _common(s)
    _check_params(s, "")
    s.add_argument("--deltas", default="0.01:0.2:10", help="a:b:k or a comma list (default 0.01:0.2:10)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    return ap


# ---------------------------------------------------------------------------
# helpers


def _grid(args) -> GridSpec:
    return GridSpec(args.n, args.L)


def _family(text: str, grid: GridSpec) -> CubeFamily:
    if text.strip().lower() == "aligned":
        return CubeFamily.default_aligned(grid)
    return CubeFamily.parse(text)


def _load_weight(args) -> Weight:
    if args.weight_file:
        try:
            return gio.read(args.weight_file)
        except OSError as exc:
            raise UsageError(f"cannot read {args.weight_file}: {exc}") from exc
    if not args.weight:
        raise UsageError("one of --weight or --weight-file is required")
    return generate(parse_spec(args.weight, _grid(args)))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _params(args, family: CubeFamily) -> VerifyParams:
    return VerifyParams(
        family=family,
        ps=tuple(args.p),
        tau=args.tau,
        tau_prime=args.tau_prime,
        kappa=args.kappa,
        mode=DoubleMode(args.mode),
    )


# ---------------------------------------------------------------------------
# commands


def cmd_constants(args) -> int:
    w = _load_weight(args)
    fam = _family(args.family, w.grid)
    rep = K.constants_report(w, fam, ps=args.p, mode=DoubleMode(args.mode), bound=args.bound)
    d = rep.to_dict()
    if args.fmt == "csv":
        rows = []
        for name in ("a_1", "fujii_wilson", "hruscev", "log_ainfty", "bmo_log", "bmo_w_log", "doubling", "jn_r_star"):
            rows.append([name, "", *_entry_cells(d[name])])
        for e in d["a_p"]:
            rows.append(["a_p", _cell(e["p"]), *_entry_cells(e)])
        _emit(_csv_text(["constant", "p", "value", "anchor", "side"], rows), args.out)
    else:
        _emit(json.dumps(d, indent=2) + "\n", args.out)
    return 0


def _entry_cells(e: dict) -> list[str]:
    wit = e["witness"]
    anchor = "" if wit is None else " ".join(str(a) for a in wit["anchor"])
    side = "" if wit is None else str(wit["side"])
    return [_cell(e["value"]), anchor, side]


def cmd_verify(args) -> int:
    ids = parse_check_ids(args.checks)
    w = _load_weight(args)
    fam = _family(args.family, w.grid)
    results = run_checks(w, ids, _params(args, fam))
    ok = all(r.passed for r in results)
    if args.fmt == "csv":
        rows = []
        for r in results:
            d = r.to_dict()
            wit = d["witness"]
            rows.append([
                d["id"], _cell(d["lhs"]), _cell(d["rhs"]), _cell(d["ratio"]), _cell(d["pass"]),
                _cell(r.tol),
                "" if wit is None else " ".join(map(str, wit["anchor"])),
                "" if wit is None else str(wit["side"]),
                json.dumps(d["params"], sort_keys=True),
            ])
        header = ["id", "lhs", "rhs", "ratio", "pass", "tol", "anchor", "side", "params"]
        _emit(_csv_text(header, rows), args.out)
    else:
        doc = {
            "v": SCHEMA_VERSION,
            "n": w.grid.n,
            "L": w.grid.L,
            "family": str(fam),
            "pass": ok,
            "results": [r.to_dict() for r in results],
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0 if ok else 1


def sweep_row(spec_text: str, grid: GridSpec, family_text: str, delta: float, ids: list[str], prm: dict) -> tuple[list[str], bool]:
    """One sweep row (formatted cells) and whether its checks all pass."""
    spec = parse_spec(spec_text, grid).with_params(delta=delta)
    w = generate(spec)
    fam = _family(family_text, grid)
    n = grid.n
    fw = K.fujii_wilson(w, fam).value
    hr = K.hruscev(w, fam).value
    logw = w.log()
    b = K.bmo(logw, fam).value
    bw = K.bmo_w(logw, w, fam).value
    r = K.jn_sup_r(w, fam).value
    p_emb = 1.0 if math.isinf(r) else 1.0 + 1.0 / r
    ap = 1.0 if p_emb == 1.0 else K.a_p(w, p_emb, fam).value
    try:
        dres = check_doubling_bound(w, fam, DoubleMode(prm["mode"]), prm["kappa"])
        dbl, kap = dres.lhs, dres.params["implied_kappa"]
    except NoAdmissibleCube:
        dbl = kap = None
    tau = prm["tau"] if prm["tau"] is not None else float(2 ** (n + 1))
    pstar = cps = None
    if n >= 2:
        pstar = sobolev_exponent(1.0, fw, tau, n)
        x1 = GridFn(grid, grid.centers()[0])
        cps = check_poincare_sobolev(x1, w, 1.0, grid.full_cube(), tau=tau, fw=fw).params["implied_c_n"]
    tsu = (b / (math.log(2.0 * hr) * bw)) if bw > 0 and hr > 1 else 0.0
    cb = b / bw if bw > 0 else 0.0
    cells = [delta, fw - 1.0, hr - 1.0, b, bw, r, p_emb, ap, dbl, pstar, tsu, kap, cb, cps]
    ok = True
    if ids:
        vp = VerifyParams(
            family=fam, ps=tuple(prm["ps"]), tau=prm["tau"], tau_prime=prm["tau_prime"],
            kappa=prm["kappa"], mode=DoubleMode(prm["mode"]),
        )
        for cid in ids:
            passed = all(res.passed for res in run_checks(w, [cid], vp))
            ok &= passed
            cells.append(passed)
    return [_cell(c) for c in cells], ok


def _sweep_task(job):
    return sweep_row(*job)


def cmd_sweep(args) -> int:
    ids = parse_check_ids(args.checks) if args.checks else []
    if args.fmt == "json":
        raise UsageError("sweep writes CSV only")
    if args.weight_file or not args.weight:
        raise UsageError("sweep needs a generator spec via --weight (flat kind)")
    grid = _grid(args)
    spec = parse_spec(args.weight, grid)
    if spec.kind is not Kind.FLAT:
        raise UsageError("sweep varies delta and needs a flat weight spec")
    _family(args.family, grid)
    try:
        deltas = delta_grid(args.deltas)
    except ValueError as exc:
        raise UsageError(f"bad --deltas: {exc}") from exc
    for d in deltas:
        spec.with_params(delta=d)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    prm = {
        "mode": args.mode, "kappa": args.kappa, "tau": args.tau,
        "tau_prime": args.tau_prime, "ps": list(args.p),
    }
    jobs = [(args.weight, grid, args.family, d, ids, prm) for d in deltas]
    if args.jobs == 1:
        out = [_sweep_task(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            out = list(ex.map(_sweep_task, jobs))
    header = SWEEP_COLUMNS + [f"pass_{cid}" for cid in ids]
    _emit(_csv_text(header, [row for row, _ in out]), args.out)
    return 0 if all(ok for _, ok in out) else 1


COMMANDS = {"constants": cmd_constants, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (UsageError, FlatWeightsError) as exc:
        print(f"flatweights: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
