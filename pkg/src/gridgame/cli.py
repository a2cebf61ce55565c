"""Scenario files, the `gridgame` command surface, and result emission.

Scenario documents are strict JSON: unknown keys anywhere are rejected
with the offending path, so a silently misspelled field cannot skew a
study.  Powers cross this boundary in MW; everything behind it is
per-unit.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import charts, dynamics, faults, game, grid, powerflow
from .errors import GridGameError, ParseError, ValidationError

_EXIT_OK = 0
_EXIT_USAGE = 1
_EXIT_CONDITION = 2
_EXIT_SOLVER = 3

_KIND_NAMES = {
    "slack": grid.BusKind.SLACK,
    "generator": grid.BusKind.GENERATOR,
    "load": grid.BusKind.LOAD,
    "microgrid": grid.BusKind.MICROGRID,
}
_SCHEMES = {"iua": dynamics.Scheme.IUA, "rua": dynamics.Scheme.RUA, "pda": dynamics.Scheme.PDA}
_FAULT_KINDS = ("generator_outage", "microgrid_shutdown", "line_trip")


@dataclass(frozen=True)
class RunReport:
    player_buses: tuple[int, ...]
    p_gen_mw: tuple[float, ...]
    theta_rad: tuple[float, ...]
    active_set: tuple[str, ...]
    steps: int | None
    converged: bool | None
    ratio_max: float
    c1: float
    c2: float | None
    iua_condition_met: bool
    rua_condition_met: bool | None
    loe: float | None
    slack_injection_mw: float
    artifacts: tuple[str, ...] = ()


def _require_keys(obj: dict, path: str, required: tuple, optional: tuple = ()):
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise ValidationError(f"unknown key '{path}.{key}'" if path else f"unknown key '{key}'")
    for key in required:
        if key not in obj:
            raise ValidationError(f"missing key '{path + '.' if path else ''}{key}'")


def _number(obj, path):
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        raise ValidationError(f"{path}: expected a number")
    return float(obj)


def _int(obj, path):
    if not isinstance(obj, int) or isinstance(obj, bool):
        raise ValidationError(f"{path}: expected an integer")
    return obj


def load_scenario(path) -> tuple[game.GameSpec, dynamics.SchemeConfig, faults.ScenarioTimeline]:
    """Parse and validate a scenario file into domain objects (per-unit)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOError(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict):
    _require_keys(
        doc, "",
        required=("buses", "branches", "slack", "market", "players", "algorithm"),
        optional=("base_mva", "team_weights", "faults"),
    )
    base = _number(doc.get("base_mva", 100.0), "base_mva")
    if base <= 0:
        raise ValidationError("base_mva: must be positive")

    slack_id = _int(doc["slack"], "slack")
    buses = []
    if not isinstance(doc["buses"], list):
        raise ValidationError("buses: expected a list")
    for k, b in enumerate(doc["buses"]):
        p = f"buses[{k}]"
        _require_keys(b, p, required=("id", "kind"), optional=("p_load_mw", "p_gen_mw"))
        kind_name = b["kind"]
        if kind_name not in _KIND_NAMES:
            raise ValidationError(f"{p}.kind: unknown kind '{kind_name}'")
        try:
            buses.append(grid.Bus(
                id=_int(b["id"], f"{p}.id"),
                kind=_KIND_NAMES[kind_name],
                p_load=_number(b.get("p_load_mw", 0.0), f"{p}.p_load_mw") / base,
                p_gen_fixed=_number(b.get("p_gen_mw", 0.0), f"{p}.p_gen_mw") / base,
            ))
        except GridGameError as exc:
            raise ValidationError(f"{p}: {exc}") from exc

    slack_kinds = [b.id for b in buses if b.kind is grid.BusKind.SLACK]
    if slack_kinds != [slack_id]:
        raise ValidationError(
            f"slack: bus {slack_id} must be the unique bus of kind 'slack', found {slack_kinds}"
        )

    branches = []
    if not isinstance(doc["branches"], list):
        raise ValidationError("branches: expected a list")
    for k, br in enumerate(doc["branches"]):
        p = f"branches[{k}]"
        _require_keys(br, p, required=("from", "to", "x_pu"), optional=("in_service",))
        x = _number(br["x_pu"], f"{p}.x_pu")
        if x <= 0:
            raise ValidationError(f"{p}.x_pu: must be positive")
        in_service = br.get("in_service", True)
        if not isinstance(in_service, bool):
            raise ValidationError(f"{p}.in_service: expected a boolean")
        try:
            branches.append(grid.Branch(
                from_bus=_int(br["from"], f"{p}.from"),
                to_bus=_int(br["to"], f"{p}.to"),
                susceptance=1.0 / x,
                in_service=in_service,
            ))
        except GridGameError as exc:
            raise ValidationError(f"{p}: {exc}") from exc

    _require_keys(doc["market"], "market", required=("zeta",))
    market = game.Market(zeta=_number(doc["market"]["zeta"], "market.zeta"))

    try:
        net = grid.Network(buses=tuple(buses), branches=tuple(branches), base_mva=base)
        s = grid.build_sensitivity(grid.build_reduced_susceptance(net))
    except GridGameError as exc:
        raise ValidationError(f"network: {exc}") from exc

    players = []
    if not isinstance(doc["players"], list) or not doc["players"]:
        raise ValidationError("players: expected a non-empty list")
    for k, pl in enumerate(doc["players"]):
        p = f"players[{k}]"
        _require_keys(pl, p, required=("bus", "psi", "eta", "p_gen_max_mw"))
        bus_id = _int(pl["bus"], f"{p}.bus")
        try:
            bus = net.bus(bus_id)
        except GridGameError as exc:
            raise ValidationError(f"{p}.bus: {exc}") from exc
        players.append(game.PlayerParams(
            bus=bus_id,
            psi=_number(pl["psi"], f"{p}.psi"),
            eta=_number(pl["eta"], f"{p}.eta"),
            p_load=bus.p_load,
            p_gen_max=_number(pl["p_gen_max_mw"], f"{p}.p_gen_max_mw") / base,
        ))

    team_weights = None
    if "team_weights" in doc:
        if not isinstance(doc["team_weights"], list):
            raise ValidationError("team_weights: expected a list")
        team_weights = tuple(
            _number(w, f"team_weights[{k}]") for k, w in enumerate(doc["team_weights"])
        )

    alg = doc["algorithm"]
    _require_keys(alg, "algorithm", required=("scheme",),
                  optional=("tau", "delta_mw", "max_steps", "seed"))
    scheme_name = alg["scheme"]
    if scheme_name not in _SCHEMES:
        raise ValidationError(f"algorithm.scheme: unknown scheme '{scheme_name}'")
    tau = None
    if "tau" in alg:
        if not isinstance(alg["tau"], list):
            raise ValidationError("algorithm.tau: expected a list")
        tau = tuple(_number(t, f"algorithm.tau[{k}]") for k, t in enumerate(alg["tau"]))
        if len(tau) != len(players):
            raise ValidationError(
                f"algorithm.tau: {len(tau)} values for {len(players)} players"
            )
    delta_mw = _number(alg.get("delta_mw", 1e-4), "algorithm.delta_mw")
    if delta_mw <= 0:
        raise ValidationError("algorithm.delta_mw: must be positive")
    max_steps = _int(alg.get("max_steps", 10_000), "algorithm.max_steps")
    seed = _int(alg.get("seed", 0), "algorithm.seed")

    try:
        spec = game.GameSpec(net=net, s=s, players=tuple(players), market=market,
                             team_weights=team_weights)
        cfg = dynamics.SchemeConfig(
            scheme=_SCHEMES[scheme_name], tau=tau, delta=delta_mw / base,
            max_steps=max_steps, seed=seed,
        )
    except GridGameError as exc:
        raise ValidationError(str(exc)) from exc

    events = []
    for k, f in enumerate(doc.get("faults", [])):
        p = f"faults[{k}]"
        _require_keys(f, p, required=("at_step", "kind"), optional=("bus", "from", "to"))
        kind = f["kind"]
        if kind not in _FAULT_KINDS:
            raise ValidationError(f"{p}.kind: unknown kind '{kind}'")
        if kind == "line_trip":
            if "from" not in f or "to" not in f:
                raise ValidationError(f"{p}: line_trip requires 'from' and 'to'")
            if "bus" in f:
                raise ValidationError(f"{p}.bus: not valid for line_trip")
            fault = faults.LineTrip(_int(f["from"], f"{p}.from"), _int(f["to"], f"{p}.to"))
        else:
            if "bus" not in f:
                raise ValidationError(f"{p}: {kind} requires 'bus'")
            if "from" in f or "to" in f:
                raise ValidationError(f"{p}: 'from'/'to' not valid for {kind}")
            bus_id = _int(f["bus"], f"{p}.bus")
            fault = (faults.GeneratorOutage(bus_id) if kind == "generator_outage"
                     else faults.MicrogridShutdown(bus_id))
        try:
            events.append(faults.FaultEvent(at_step=_int(f["at_step"], f"{p}.at_step"),
                                            kind=fault))
        except GridGameError as exc:
            raise ValidationError(f"{p}: {exc}") from exc
    try:
        timeline = faults.ScenarioTimeline(events=tuple(sorted(events, key=lambda e: e.at_step)))
    except GridGameError as exc:
        raise ValidationError(f"faults: {exc}") from exc

    return spec, cfg, timeline


def scenario_to_dict(spec: game.GameSpec, cfg: dynamics.SchemeConfig,
                     timeline: faults.ScenarioTimeline) -> dict:
    """Normalized scenario document (MW units) for machine-readable reports."""
    base = spec.net.base_mva
    doc: dict = {"base_mva": base, "slack": spec.net.slack}
    doc["buses"] = [
        {
            "id": b.id,
            "kind": b.kind.value,
            "p_load_mw": b.p_load * base,
            "p_gen_mw": b.p_gen_fixed * base,
        }
        for b in spec.net.buses
    ]
    doc["branches"] = [
        {"from": br.from_bus, "to": br.to_bus, "x_pu": 1.0 / br.susceptance,
         "in_service": br.in_service}
        for br in spec.net.branches
    ]
    doc["market"] = {"zeta": spec.market.zeta}
    doc["players"] = [
        {"bus": p.bus, "psi": p.psi, "eta": p.eta, "p_gen_max_mw": p.p_gen_max * base}
        for p in spec.players
    ]
    if spec.team_weights is not None:
        doc["team_weights"] = list(spec.team_weights)
    doc["algorithm"] = {
        "scheme": cfg.scheme.value,
        "delta_mw": cfg.delta * base,
        "max_steps": cfg.max_steps,
        "seed": cfg.seed,
    }
    if cfg.tau is not None:
        doc["algorithm"]["tau"] = list(cfg.tau)
    doc["faults"] = []
    for ev in timeline.events:
        k = ev.kind
        if isinstance(k, faults.LineTrip):
            doc["faults"].append({"at_step": ev.at_step, "kind": "line_trip",
                                  "from": k.from_bus, "to": k.to_bus})
        elif isinstance(k, faults.GeneratorOutage):
            doc["faults"].append({"at_step": ev.at_step, "kind": "generator_outage",
                                  "bus": k.bus})
        else:
            doc["faults"].append({"at_step": ev.at_step, "kind": "microgrid_shutdown",
                                  "bus": k.bus})
    return doc


def _condition_fields(spec, cfg):
    rep = dynamics.check_conditions(spec, cfg)
    return rep


def _report_for_equilibrium(spec, cfg, eq: game.Equilibrium, steps=None, converged=None,
                            artifacts=()) -> RunReport:
    base = spec.net.base_mva
    rep = _condition_fields(spec, cfg)
    loe = game.loss_of_efficiency(spec) if spec.team_weights is not None else None
    pos = [spec.s.index_of(b) for b in eq.player_buses]
    inj = powerflow.injections_from_state(
        spec.net, dict(zip(eq.player_buses, eq.p_gen))
    )
    return RunReport(
        player_buses=tuple(eq.player_buses),
        p_gen_mw=tuple(float(g) * base for g in eq.p_gen),
        theta_rad=tuple(float(eq.angles.values[k]) for k in pos),
        active_set=tuple(s.value for s in eq.active_set),
        steps=steps,
        converged=converged,
        ratio_max=rep.ratio_max,
        c1=rep.c1,
        c2=rep.c2,
        iua_condition_met=rep.iua_condition_met,
        rua_condition_met=rep.rua_condition_met,
        loe=loe,
        slack_injection_mw=powerflow.slack_injection(spec.net, inj) * base,
        artifacts=tuple(artifacts),
    )


def _print_report(report: RunReport, spec, cfg, timeline, fmt: str, out=sys.stdout):
    if fmt == "json":
        payload = {
            "scenario": scenario_to_dict(spec, cfg, timeline),
            "report": dataclasses.asdict(report),
        }
        json.dump(payload, out, indent=2)
        out.write("\n")
        return
    out.write(f"{'bus':>5s} {'P_g* (MW)':>12s} {'theta* (rad)':>14s} {'status':>12s}\n")
    for bus, gen, th, st in zip(report.player_buses, report.p_gen_mw,
                                report.theta_rad, report.active_set):
        out.write(f"{bus:>5d} {gen:>12.3f} {th:>14.6e} {st:>12s}\n")
    out.write(_condition_text(report, cfg))
    if report.steps is not None:
        word = "converged" if report.converged else "stopped at step cap"
        out.write(f"{word} after {report.steps} steps\n")
    if report.loe is not None:
        out.write(f"LOE={report.loe:.6f}\n")
    out.write(f"slack injection: {report.slack_injection_mw:.3f} MW "
              f"(>= 0: {'yes' if report.slack_injection_mw >= 0 else 'no'})\n")
    for a in report.artifacts:
        out.write(f"wrote {a}\n")


def _condition_text(report: RunReport, cfg) -> str:
    lines = [f"ratio_max={report.ratio_max:.3f}\n"]
    verdict = "satisfied" if report.iua_condition_met else "NOT satisfied"
    lines.append(f"c1={report.c1:.3f} < 1: {verdict}\n")
    if report.c2 is not None:
        verdict = "satisfied" if report.rua_condition_met else "NOT satisfied"
        tau_hi, tau_lo = max(cfg.tau), min(cfg.tau)
        lines.append(
            f"c2={report.c2:.3f}; tau_max*c1={tau_hi * report.c1:.3f} < "
            f"tau_min={tau_lo:.3f}: {verdict}\n"
        )
    return "".join(lines)


def cmd_solve(spec, cfg, timeline, fmt: str, out=sys.stdout) -> int:
    eq = game.solve_ne_direct(spec)
    report = _report_for_equilibrium(spec, cfg, eq)
    _print_report(report, spec, cfg, timeline, fmt, out)
    return _EXIT_OK


def cmd_check(spec, cfg, timeline, fmt: str, out=sys.stdout) -> int:
    rep = _condition_fields(spec, cfg)
    met = rep.iua_condition_met if cfg.scheme is dynamics.Scheme.IUA else bool(rep.rua_condition_met)
    if fmt == "json":
        payload = {
            "scenario": scenario_to_dict(spec, cfg, timeline),
            "report": {
                "scheme": cfg.scheme.value,
                "ratio_max": rep.ratio_max,
                "c1": rep.c1,
                "c2": rep.c2,
                "iua_condition_met": rep.iua_condition_met,
                "rua_condition_met": rep.rua_condition_met,
                "selected_condition_met": met,
            },
        }
        json.dump(payload, out, indent=2)
        out.write("\n")
    else:
        fake = RunReport(
            player_buses=(), p_gen_mw=(), theta_rad=(), active_set=(),
            steps=None, converged=None, ratio_max=rep.ratio_max, c1=rep.c1,
            c2=rep.c2, iua_condition_met=rep.iua_condition_met,
            rua_condition_met=rep.rua_condition_met, loe=None,
            slack_injection_mw=0.0,
        )
        out.write(_condition_text(fake, cfg))
        out.write(f"selected scheme '{cfg.scheme.value}': "
                  f"{'satisfied' if met else 'NOT satisfied'}\n")
    return _EXIT_OK if met else _EXIT_CONDITION


def write_trajectory_csv(path: Path, spec, traj: dynamics.Trajectory):
    base = spec.net.base_mva
    with open(path, "w", newline="") as fh:
        fh.write("step,bus,p_gen_mw,theta_rad,step_change_mw\n")
        for n in range(traj.gens.shape[0]):
            for k, bus in enumerate(traj.player_buses):
                fh.write(
                    f"{n},{bus},{traj.gens[n, k] * base:.6f},"
                    f"{traj.angles[n, k]:.6f},{traj.step_changes[n] * base:.6f}\n"
                )


def cmd_run(spec, cfg, timeline, fmt: str, out_dir, out=sys.stdout) -> int:
    out_path = Path(out_dir)
    try:
        out_path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(f"cannot create output directory {out_dir}: {exc}") from exc

    traj = dynamics.run(spec, cfg, timeline=timeline)
    base = spec.net.base_mva

    csv_path = out_path / "trajectory.csv"
    write_trajectory_csv(csv_path, spec, traj)

    steps = np.arange(traj.gens.shape[0])
    gen_series = {
        f"bus {bus}": (steps.tolist(), (traj.gens[:, k] * base).tolist())
        for k, bus in enumerate(traj.player_buses)
    }
    ang_series = {
        f"bus {bus}": (steps.tolist(), traj.angles[:, k].tolist())
        for k, bus in enumerate(traj.player_buses)
    }
    gen_svg = out_path / "generation.svg"
    gen_svg.write_text(charts.line_chart_svg(
        gen_series, "Renewable generation", "step", "generation (MW)"))
    ang_svg = out_path / "angles.svg"
    ang_svg.write_text(charts.line_chart_svg(
        ang_series, "Bus voltage angles", "step", "angle (rad)"))

    # terminal state of the (possibly faulted) system
    live_spec = spec
    for _, ev in traj.events_applied:
        live_spec = faults.apply_fault(live_spec, ev)
    final_gen = {bus: traj.gens[-1, k] for k, bus in enumerate(traj.player_buses)
                 if bus in live_spec.player_buses}
    inj = powerflow.injections_from_state(live_spec.net, final_gen)
    angles = powerflow.solve_angles(live_spec.s, inj)
    p_net = np.array([final_gen[b] - live_spec.net.bus(b).p_load
                      for b in live_spec.player_buses])
    statuses = []
    for k, p in enumerate(live_spec.players):
        d = game.derive_player(live_spec, k)
        if p_net[k] <= d.p_min + 1e-12:
            statuses.append(game.PlayerStatus.AT_ZERO_GEN)
        elif p_net[k] >= d.p_max - 1e-12:
            statuses.append(game.PlayerStatus.AT_CAPACITY)
        else:
            statuses.append(game.PlayerStatus.INNER)
    eq = game.Equilibrium(
        player_buses=live_spec.player_buses,
        p_net=p_net,
        p_gen=np.array([final_gen[b] for b in live_spec.player_buses]),
        angles=angles,
        active_set=tuple(statuses),
    )
    artifacts = [str(csv_path), str(out_path / "summary.txt"), str(gen_svg), str(ang_svg)]
    report = _report_for_equilibrium(
        live_spec, cfg, eq, steps=traj.status.step, converged=traj.status.converged,
        artifacts=artifacts,
    )

    summary = out_path / "summary.txt"
    with open(summary, "w") as fh:
        _print_report(report, live_spec, cfg, timeline, "text", out=fh)
        if traj.events_applied:
            fh.write("events applied:\n")
            for step, ev in traj.events_applied:
                fh.write(f"  step {step}: {ev.kind}\n")

    _print_report(report, spec, cfg, timeline, fmt, out)
    return _EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(_EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridgame",
                     description="Microgrid generation-game solver and simulator")
    parser.add_argument("--format", choices=("text", "json"), default="text",
                        help="report format")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario's RNG seed")
    sub = parser.add_subparsers(dest="command", required=True)
    p_solve = sub.add_parser("solve", help="compute the equilibrium directly")
    p_solve.add_argument("scenario")
    p_run = sub.add_parser("run", help="simulate the configured update scheme")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", required=True, help="output directory for artifacts")
    p_check = sub.add_parser("check", help="evaluate the convergence conditions")
    p_check.add_argument("scenario")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else _EXIT_USAGE

    try:
        spec, cfg, timeline = load_scenario(args.scenario)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
    except (ParseError, ValidationError, IOError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return _EXIT_USAGE

    try:
        if args.command == "solve":
            return cmd_solve(spec, cfg, timeline, args.format)
        if args.command == "check":
            return cmd_check(spec, cfg, timeline, args.format)
        if args.command == "run":
            return cmd_run(spec, cfg, timeline, args.format, args.out)
    except IOError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return _EXIT_USAGE
    except GridGameError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return _EXIT_SOLVER
    return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
