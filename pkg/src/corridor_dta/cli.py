"""Command-line front end: ``corridor-dta reduce|solve|figures``.

Exit codes: 0 success, 1 solver or runtime failure, 2 bad config or flags,
3 closed-form equilibrium refused because its slope conditions fail (use
``--numeric-fallback`` to substitute the discrete equilibrium).
The log level comes from ``CORRIDOR_DTA_LOG`` (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (DsoSolution, DueSolution, FeasibilityReport, build_cumulative_curves,
                       check_due_feasibility, solve_dso, solve_due)
from .config import ScenarioConfig, load_config, parse_grid_flag
from .csvio import SeriesTable, fmt
from .errors import ConfigError, CorridorError
from .numeric import (ComparisonReport, LcpSolution, LpSolution, TimeGrid, build_dso_lp, build_lcp,
                      compare_solutions, sample_state, solve_lcp, solve_lp)
from .pwl import PiecewiseLinearFn
from .reduction import ReducedNetwork, disaggregate, reduce

log = logging.getLogger("corridor_dta")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_REFUSED = 0, 1, 2, 3
DEFAULT_K = 600
SUMMARY_SCHEMA = "corridor-dta summary v1"


def _label(group) -> str:
    return "+".join(str(j + 1) for j in group)


def _num(x):
    """JSON-safe number with the same 12 significant digits as the CSV."""
    x = float(x)
    if not np.isfinite(x):
        return str(x)
    return float(fmt(x))


def _nums(a):
    return [_num(v) for v in np.ravel(a)]


# ----------------------------------------------------------------------
# reduce


def reduction_report(cfg: ScenarioConfig) -> str:
    net = cfg.network
    red = reduce(net)
    lines = [f"scenario: {cfg.name}", f"bottlenecks: {net.n_bottlenecks}"]
    if red.is_identity:
        lines.append("no false bottlenecks")
    else:
        for j in sorted(red.false_set):
            r = red.reduced_index(j)
            lines.append(f"bottleneck {j + 1} false, merged into origin group {_label(red.origin_map[r])}")
    lines.append("origin groups: " + ", ".join(f"{r + 1} <- {{{_label(g)}}}" for r, g in enumerate(red.origin_map)))
    lines.append("bottleneck  capacity  demand  normalized_demand  status")
    for j in range(net.n_bottlenecks):
        status = "false" if j in red.false_set else "kept"
        lines.append(f"{j + 1:>10}  {fmt(net.capacities[j]):>8}  {fmt(net.demands[j]):>6}  "
                     f"{fmt(red.normalized[j]):>17}  {status}")
    return "\n".join(lines)


def cmd_reduce(cfg: ScenarioConfig, stream=None) -> int:
    print(reduction_report(cfg), file=stream or sys.stdout)
    return EXIT_OK


# ----------------------------------------------------------------------
# solve


@dataclass
class SolveOutcome:
    config: ScenarioConfig
    reduction: ReducedNetwork
    grid: TimeGrid | None = None
    dso: DsoSolution | None = None
    reduced_dso: DsoSolution | None = None
    feasibility: FeasibilityReport | None = None
    due: DueSolution | None = None
    lp: LpSolution | None = None
    lcp: LcpSolution | None = None
    comparison: ComparisonReport | None = None
    refused: bool = False
    fallback_used: bool = False
    notes: list = field(default_factory=list)


def run_solve(cfg: ScenarioConfig, mode: str = "both", method: str = "both", grid: TimeGrid | None = None,
              numeric_fallback: bool = False, lcp_method: str = "lemke") -> SolveOutcome:
    net, s = cfg.network, cfg.schedule
    want_dso = mode in ("dso", "both")
    want_due = mode in ("due", "both")
    analytic = method in ("analytic", "both")
    numeric = method in ("numeric", "both")
    red = reduce(net)
    out = SolveOutcome(cfg, red, grid or cfg.grid)
    need_grid = numeric
    # the closed-form optimum is always computed: the windows drive the slope checks
    out.reduced_dso = solve_dso(red.network, s)
    out.dso = out.reduced_dso if red.is_identity else disaggregate(out.reduced_dso, red, net)
    if want_due:
        out.feasibility = check_due_feasibility(red.network, s, out.reduced_dso.windows)
        if analytic:
            if out.feasibility.ok:
                out.due = solve_due(out.reduced_dso, red.network, s)
            elif numeric_fallback:
                out.fallback_used = True
                need_grid = True
                out.notes.append("closed-form equilibrium refused; discrete equilibrium used instead")
            else:
                out.refused = True
    if need_grid and out.grid is None:
        out.grid = TimeGrid.for_horizon(net.horizon, DEFAULT_K)
        out.notes.append(f"no grid given; using K={DEFAULT_K}")
    if numeric or out.fallback_used:
        if want_dso and numeric:
            out.lp = solve_lp(build_dso_lp(net, s, out.grid))
        if want_due:
            out.lcp = solve_lcp(build_lcp(net, s, out.grid), method=lcp_method)
    if want_dso and want_due and out.grid is not None and out.lcp is not None:
        out.comparison = compare_solutions(out.dso, out.lcp, out.grid, s)
    return out


def _closed_form_table(sol, labels, bottlenecks) -> SeriesTable:
    """Rows for a closed-form solution; ``labels`` name origins, ``bottlenecks`` name bottlenecks."""
    tab = SeriesTable()
    is_due = isinstance(sol, DueSolution)
    net = sol.network
    for i, lab in enumerate(labels):
        w = sol.windows[i]
        empty = net.demands[i] == 0
        if empty:
            tab.add(w.start, sol.costs[i], lab, "cost")
            continue
        tab.add(w.start, w.length, lab, "window_start")
        tab.add(w.end, w.length, lab, "window_end")
        tab.add([w.start, w.end], sol.costs[i], lab, "cost")
        tab.add_pwl(sol.delays[i] if is_due else sol.prices[i], lab, "delay" if is_due else "price")
        tab.add_pwl(sol.flows[i], lab, "flow")
        tab.add_pwl(sol.flows[i].antiderivative(), lab, "cumulative")
        if is_due:
            tab.add_pwl(sol.outflows[i], lab, "outflow")
    if net.demands.sum() > 0:
        curves = build_cumulative_curves(sol)
        for i in range(net.n_bottlenecks):
            tab.add_pwl(curves.arrival[i], bottlenecks[i], "bottleneck_arrival")
            tab.add_pwl(curves.departure[i], bottlenecks[i], "bottleneck_departure")
            if net.demands[i] > 0:
                tab.add_pwl(curves.destination[i], labels[i], "destination_arrival")
    return tab


def _discrete_table(sol, net, grid: TimeGrid) -> SeriesTable:
    tab = SeriesTable()
    is_lcp = isinstance(sol, LcpSolution)
    mass = sol.q if is_lcp else sol.flows * grid.dk
    delay = sol.w if is_lcp else sol.prices
    costs = sol.rho if is_lcp else sol.costs
    edges, times = grid.edges, grid.times
    for i in range(net.n_bottlenecks):
        lab = str(i + 1)
        used = np.flatnonzero(mass[:, i] > 1e-9 * max(1.0, net.demands[i]))
        if used.size == 0:
            tab.add(0.0, costs[i], lab, "cost")
            continue
        a, b = edges[used[0]], edges[used[-1] + 1]
        tab.add(a, b - a, lab, "window_start")
        tab.add(b, b - a, lab, "window_end")
        tab.add([a, b], costs[i], lab, "cost")
        tab.add(times, delay[:, i], lab, "delay" if is_lcp else "price")
        rate = mass[:, i] / grid.dk
        tab.add(np.repeat(edges, 2)[1:-1], np.repeat(rate, 2), lab, "flow")
        tab.add(edges, np.concatenate([[0.0], np.cumsum(mass[:, i])]), lab, "cumulative")
    return tab


def summary_dict(out: SolveOutcome) -> dict:
    cfg = out.config
    net, red = cfg.network, out.reduction
    d: dict = {
        "schema": SUMMARY_SCHEMA,
        "version": __version__,
        "name": cfg.name,
        "direction": net.direction.value,
        "n_bottlenecks": net.n_bottlenecks,
        "false_bottlenecks": sorted(j + 1 for j in red.false_set),
        "origin_groups": [_label(g) for g in red.origin_map],
        "notes": list(out.notes),
    }
    if out.dso is not None:
        d["dso_analytic"] = {
            "costs": _nums(out.dso.costs),
            "window_lengths": _nums(out.dso.window_lengths),
            "windows": [[_num(w.start), _num(w.end)] for w in out.dso.windows],
            "objective": _num(out.dso.objective()),
            "toll_revenue": _num(out.dso.toll_revenue()),
            "flow_split_unique": bool(out.dso.flow_split_unique),
        }
    if out.feasibility is not None:
        d["due_feasibility"] = {
            "ok": out.feasibility.ok,
            "violations": [str(v) for v in out.feasibility.violations],
        }
    if out.due is not None:
        d["due_analytic"] = {
            "origins": [_label(g) for g in red.origin_map],
            "costs": _nums(out.due.costs),
            "total_queuing_delay": _num(out.due.total_queuing_delay()),
        }
    elif out.refused:
        d["due_analytic"] = {"refused": True}
    if out.grid is not None and (out.lp is not None or out.lcp is not None):
        d["grid"] = {"K": out.grid.K, "dk": _num(out.grid.dk)}
    if out.lp is not None:
        d["dso_lp"] = {"objective": _num(out.lp.objective), "costs": _nums(out.lp.costs),
                       "duality_gap": _num(out.lp.duality_gap)}
    if out.lcp is not None:
        d["due_lcp"] = {"method": out.lcp.method, "costs": _nums(out.lcp.rho),
                        "residuals": {k: _num(v) for k, v in sorted(out.lcp.residuals.items())}}
    if out.comparison is not None:
        d["comparison"] = {k: (_num(v) if isinstance(v, float) else v)
                           for k, v in out.comparison.as_dict().items()}
    return d


def write_solve_outputs(out: SolveOutcome, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    net = out.config.network
    paths = []
    orig_labels = [str(j + 1) for j in range(net.n_bottlenecks)]
    if out.dso is not None:
        paths.append(_closed_form_table(out.dso, orig_labels, orig_labels).write(directory / "dso_analytic.csv"))
    if out.due is not None:
        red = out.reduction
        labels = [_label(g) for g in red.origin_map]
        necks = [str(j + 1) for j in red.survivors]
        paths.append(_closed_form_table(out.due, labels, necks).write(directory / "due_analytic.csv"))
    if out.lp is not None:
        paths.append(_discrete_table(out.lp, net, out.grid).write(directory / "dso_lp.csv"))
    if out.lcp is not None:
        paths.append(_discrete_table(out.lcp, net, out.grid).write(directory / "due_lcp.csv"))
    p = directory / "summary.json"
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary_dict(out), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(p)
    return paths


def cmd_solve(cfg: ScenarioConfig, out_dir: Path, mode="both", method="both", grid=None,
              numeric_fallback=False, lcp_method="lemke", stream=None) -> int:
    stream = stream or sys.stdout
    out = run_solve(cfg, mode, method, grid, numeric_fallback, lcp_method)
    paths = write_solve_outputs(out, out_dir)
    for p in paths:
        print(f"wrote {p}", file=stream)
    if out.feasibility is not None and out.feasibility.ok:
        print(str(out.feasibility), file=stream)
    if out.comparison is not None:
        print(f"regime: {out.comparison.regime.value} ({out.comparison.regime.description})", file=stream)
        print(f"verdict: {out.comparison.verdict}", file=stream)
    if out.refused:
        print("error: closed-form equilibrium refused because the slope conditions fail; "
              "rerun with --numeric-fallback to use the discrete equilibrium", file=sys.stderr)
        print(str(out.feasibility), file=sys.stderr)
        return EXIT_REFUSED
    return EXIT_OK


# ----------------------------------------------------------------------
# figures


def _xy(f):
    return np.asarray(f.x, float), np.asarray(f.y, float)


def _diff_xy(f, g):
    """Rows for f - g on the union of both breakpoint sets."""
    if isinstance(f, PiecewiseLinearFn) and isinstance(g, PiecewiseLinearFn):
        return _xy(f - g)
    x = np.unique(np.concatenate([f.x, g.x]))
    return x, np.asarray(f(x)) - np.asarray(g(x))


@dataclass
class FigureState:
    name: str           # "dso" or "due"
    style: str          # "dashed" or "solid"
    source: str         # "analytic", "lcp"
    state: object       # SampledState-like: arrival/departure/destination callables with x, y
    flows: list         # per origin (times, rates)
    delays: list        # per origin (times, values)
    costs: np.ndarray
    outflows: list | None = None


def _figure_state_analytic(sol, name, style, grid) -> FigureState:
    curves = build_cumulative_curves(sol)

    class _S:
        arrival = curves.arrival
        departure = curves.departure
        destination = curves.destination

    series = sol.delays if isinstance(sol, DueSolution) else sol.prices
    N = sol.network.n_bottlenecks
    outflows = [_xy(sol.outflows[i]) for i in range(N)] if isinstance(sol, DueSolution) else None
    return FigureState(name, style, "analytic", _S, [_xy(f) for f in sol.flows], [_xy(f) for f in series],
                       np.asarray(sol.costs, float), outflows)


def _figure_state_discrete(sol, name, style) -> FigureState:
    st = sample_state(sol)
    g = st.grid
    edges = g.edges
    flows = [(np.repeat(edges, 2)[1:-1], np.repeat(st.flows[:, i] / g.dk, 2)) for i in range(st.network.n_bottlenecks)]
    delays = [(g.times, st.delays[:, i]) for i in range(st.network.n_bottlenecks)]
    return FigureState(name, style, st.label, st, flows, delays, st.costs)


def build_figure_tables(cfg: ScenarioConfig, out: SolveOutcome) -> dict[str, SeriesTable]:
    net = cfg.network
    N = net.n_bottlenecks
    states = []
    if out.dso is not None:
        states.append(_figure_state_analytic(out.dso, "dso", "dashed", out.grid))
    if out.due is not None and out.reduction.is_identity:
        states.append(_figure_state_analytic(out.due, "due", "solid", out.grid))
    elif out.lcp is not None:
        states.append(_figure_state_discrete(out.lcp, "due", "solid"))
    tables: dict[str, SeriesTable] = {}
    for fs in states:
        tag = f"{fs.name}:{fs.style}"
        agg = SeriesTable()
        for j in range(N):
            agg.add(*_xy(fs.state.arrival[j]), j + 1, f"arrival:{tag}")
            agg.add(*_xy(fs.state.departure[j]), j + 1, f"departure:{tag}")
        tables[f"fig_{fs.name}_aggregate"] = agg
        for i in range(N):
            t = SeriesTable()
            if i + 1 < N:
                t.add(*_diff_xy(fs.state.departure[i], fs.state.departure[i + 1]), i + 1, f"disaggregate:{tag}")
            else:
                t.add(*_xy(fs.state.departure[i]), i + 1, f"disaggregate:{tag}")
            t.add(*_xy(fs.state.destination[i]), i + 1, f"destination_arrival:{tag}")
            tables[f"fig_{fs.name}_disaggregate_{i + 1}"] = t
        fl = SeriesTable()
        for i in range(N):
            fl.add(*fs.flows[i], i + 1, f"flow:{tag}")
            if fs.outflows is not None:
                fl.add(*fs.outflows[i], i + 1, f"outflow:{tag}")
        tables[f"fig_{fs.name}_flows"] = fl
        co = SeriesTable()
        kind = "delay" if fs.name == "due" else "price"
        for i in range(N):
            co.add(*fs.delays[i], i + 1, f"{kind}:{tag}")
            co.add([0.0, net.horizon], fs.costs[i], i + 1, f"cost:{tag}")
        tables[f"fig_{fs.name}_costs"] = co
    if out.dso is not None:
        win = SeriesTable()
        for i, w in enumerate(out.dso.windows):
            if net.demands[i] > 0:
                win.add(w.start, w.length, i + 1, "earliest:dotted")
                win.add(w.end, w.length, i + 1, "latest:dotted")
        tables["fig_windows"] = win
    return tables


def _write_svg(table: SeriesTable, path: Path, title: str) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "corridor-dta"
    import matplotlib.pyplot as plt

    groups: dict = {}
    for t, v, o, s in table.rows:
        groups.setdefault((o, s), ([], []))
        groups[(o, s)][0].append(t)
        groups[(o, s)][1].append(v)
    fig, ax = plt.subplots(figsize=(6, 4))
    for (o, s), (x, y) in groups.items():
        style = "--" if "dashed" in s else (":" if "dotted" in s else "-")
        if "dotted" in s:
            for xv in x:
                ax.axvline(xv, linestyle=":", linewidth=0.8)
        else:
            ax.plot(x, y, linestyle=style, linewidth=1.0, label=f"{s.split(':')[0]} {o}")
    ax.set_title(title)
    ax.set_xlabel("time")
    if ax.get_legend_handles_labels()[1] and len(groups) <= 12:
        ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def cmd_figures(cfg: ScenarioConfig, out_dir: Path, mode="both", grid=None, svg=False, lcp_method="lemke",
                stream=None) -> int:
    stream = stream or sys.stdout
    red = reduce(cfg.network)
    dso_red = solve_dso(red.network, cfg.schedule)
    feasible = check_due_feasibility(red.network, cfg.schedule, dso_red.windows).ok
    # the closed form is used whenever it exists; otherwise the discrete equilibrium
    method = "analytic" if (feasible and red.is_identity) or mode == "dso" else "both"
    out = run_solve(cfg, mode, method, grid, numeric_fallback=True, lcp_method=lcp_method)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, table in build_figure_tables(cfg, out).items():
        p = table.write(out_dir / f"{name}.csv")
        print(f"wrote {p}", file=stream)
        if svg:
            print(f"wrote {_write_svg(table, out_dir / f'{name}.svg', name)}", file=stream)
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corridor-dta", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path, help="scenario TOML file")

    r = sub.add_parser("reduce", help="report false bottlenecks and the reduced corridor")
    common(r)

    for name, helptext in (("solve", "solve a scenario and write series files"),
                           ("figures", "write plot-data bundles for cumulative curves, flows and costs")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--mode", choices=("dso", "due", "both"), default="both")
        sp.add_argument("--grid", help="time grid, e.g. K=600,dk=0.1 (overrides the config)")
        sp.add_argument("--out", type=Path, help="output directory (overrides the config)")
        sp.add_argument("--lcp-method", choices=("lemke", "frank-wolfe"), default="lemke")
        if name == "solve":
            sp.add_argument("--method", choices=("analytic", "numeric", "both"), default="analytic")
            sp.add_argument("--numeric-fallback", action="store_true",
                            help="use the discrete equilibrium when the closed form is refused")
        else:
            sp.add_argument("--svg", action="store_true", help="also write one SVG per CSV (needs matplotlib)")
    return p


def _setup_logging() -> None:
    level = os.environ.get("CORRIDOR_DTA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "reduce":
            return cmd_reduce(cfg)
        grid = parse_grid_flag(args.grid, cfg.network.horizon) if args.grid else None
        out_dir = args.out or cfg.output or Path("out") / cfg.name
        if args.command == "solve":
            return cmd_solve(cfg, out_dir, args.mode, args.method, grid, args.numeric_fallback, args.lcp_method)
        return cmd_figures(cfg, out_dir, args.mode, grid, args.svg, args.lcp_method)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CorridorError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
