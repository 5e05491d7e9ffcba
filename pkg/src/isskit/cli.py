"""Command line scenario runner.

``isskit run scenario.json [--out DIR] [--seed N]`` executes one scenario
and writes ``report.json`` plus CSV traces; ``isskit replay witness.json``
re-checks a recorded violation; ``isskit list-builtins`` lists the named
systems.

Exit codes: 0 success or no counterexample, 1 falsified (a witness is
written), 2 hypothesis violation, 3 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import comparison as cf
from . import etc as etc_mod
from . import lyapunov as ly
from . import probe
from . import smallgain as sg
from .dynamics import InputSignal, integrate
from .reports import (DISCLAIMER, FALSIFIED, HYPOTHESIS_VIOLATION, NO_COUNTEREXAMPLE,
                      ProbeReport, dumps)
from .systems import BUILTINS, system_from_json
from .witness import WITNESS_SCHEMA, StaleWitnessError, replay_witness

EXIT_OK, EXIT_FALSIFIED, EXIT_HYPOTHESIS, EXIT_USAGE = 0, 1, 2, 3
REPORT_SCHEMA = "isskit-report/1"
TIMESTAMP_FIELD = "generated_at"

# ISSKIT_<NAME> overrides the built-in default of the matching setting;
# values given in the scenario file take precedence.
ENV_SETTINGS = {
    "INT_REL_TOL": "int_rel_tol",
    "INT_ABS_TOL": "int_abs_tol",
    "BLOWUP_THRESHOLD": "blowup_threshold",
    "PROBE_ABS_TOL": "abs_tol",
    "PROBE_REL_TOL": "rel_tol",
    "HORIZON": "horizon",
}


class UsageError(Exception):
    """Bad command line or scenario; maps to exit code 3."""


# -- schemas -----------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_FN = {"type": "object", "required": ["form"], "properties": {"form": {"type": "string"}}}
_KL = {"type": "object", "required": ["form", "q", "d"],
       "properties": {"form": {"enum": ["product", "nested"]}, "q": _FN, "d": _FN}}
_SYSTEM = {"type": "object", "oneOf": [
    {"required": ["name"], "properties": {"name": {"enum": sorted(BUILTINS)}}},
    {"required": ["polynomial"], "properties": {"polynomial": {
        "type": "object", "required": ["state_dim", "input_dim", "terms"],
        "properties": {"state_dim": {"type": "integer", "minimum": 1},
                       "input_dim": {"type": "integer", "minimum": 1},
                       "terms": {"type": "array"}}}}},
]}
_INPUT = {"type": "object", "required": ["breakpoints", "values"],
          "properties": {"breakpoints": _VEC, "values": {"type": "array", "items": _VEC}}}
_INTEGRATION = {"type": "object", "additionalProperties": False,
                "properties": {"rel_tol": _POS, "abs_tol": _POS, "blowup_threshold": _POS}}
_BUDGET = {"type": "object", "additionalProperties": False, "properties": {
    "radii": _VEC, "magnitudes": _VEC, "n_samples": {"type": "integer", "minimum": 1},
    "max_pieces": {"type": "integer", "minimum": 1}, "horizon": _POS,
    "grid_points": {"type": "integer", "minimum": 2}, "abs_tol": _POS, "rel_tol": _POS,
    "int_rel_tol": _POS, "int_abs_tol": _POS, "blowup_threshold": _POS}}
_V = {"type": "object", "oneOf": [
    {"required": ["name"], "properties": {"name": {"enum": ["quadratic", "abs"]}}},
    {"required": ["polynomial"]}]}
_DISS = {"type": "object", "required": ["V", "psi1", "psi2", "alpha", "xi"],
         "properties": {"V": _V, "psi1": _FN, "psi2": _FN, "alpha": _FN, "xi": _FN}}
_IMPL = {"type": "object", "required": ["V", "psi1", "psi2", "gamma_ij", "gamma_iu", "alpha_tilde"],
         "properties": {"V": _V, "psi1": _FN, "psi2": _FN, "gamma_iu": _FN, "alpha_tilde": _FN,
                        "gamma_ij": {"oneOf": [_FN, {"type": "array", "items": _FN}]}}}
_NETWORK = {"type": "object", "required": ["name"],
            "properties": {"name": {"const": "line_network"}, "N": {"type": "integer", "minimum": 1},
                           "coupling": {"type": "number", "minimum": 0},
                           "boundary": {"enum": ["zero", "periodic"]}}}
_PROBE = {"type": "object", "required": ["property"], "properties": {
    "property": {"enum": ["ISS", "ULS", "LIM", "ULIM", "AG", "FC"]},
    "estimate": {"type": "object", "required": ["beta", "gamma"],
                 "properties": {"beta": _KL, "gamma": _FN}},
    "sigma": _FN, "gamma": _FN, "r": _POS, "radii": _VEC, "eps": _VEC, "r_grid": _VEC},
    "allOf": [
        {"if": {"properties": {"property": {"const": "ISS"}}}, "then": {"required": ["estimate"]}},
        {"if": {"properties": {"property": {"const": "ULS"}}},
         "then": {"required": ["sigma", "gamma", "r"]}},
        {"if": {"properties": {"property": {"enum": ["LIM", "ULIM"]}}},
         "then": {"required": ["gamma"]}},
        {"if": {"properties": {"property": {"const": "AG"}}}, "then": {"required": ["radii"]}},
    ]}
_X0_PROFILE = {"oneOf": [_VEC, {"type": "object", "required": ["profile"], "properties": {
    "profile": {"const": "exp_decay"}, "amplitude": _NUM, "rate": _POS}}]}

KIND_SCHEMAS = {
    "simulate": {"required": ["system", "x0", "horizon"], "properties": {
        "system": _SYSTEM, "x0": _VEC, "input": _INPUT, "horizon": _POS,
        "grid_points": {"type": "integer", "minimum": 2}, "integration": _INTEGRATION}},
    "iss_probe": {"required": ["system", "probes"], "properties": {
        "system": _SYSTEM, "budget": _BUDGET,
        "probes": {"type": "array", "items": _PROBE, "minItems": 1}}},
    "lyapunov_check": {"oneOf": [
        {"required": ["system", "certificate"]},
        {"required": ["network", "index", "implication"]}], "properties": {
        "system": _SYSTEM, "certificate": _DISS, "budget": _BUDGET, "network": _NETWORK,
        "index": {"type": "integer", "minimum": 0}, "implication": _IMPL,
        "n_samples": {"type": "integer", "minimum": 1}}},
    "etc_sim": {"required": ["plant", "feedback", "certificate", "sigma", "x0", "horizon"],
                "properties": {
        "plant": _SYSTEM, "certificate": _DISS, "x0": _VEC, "horizon": _POS,
        "feedback": {"type": "object", "oneOf": [
            {"required": ["linear"], "properties": {"linear": {"type": "array", "items": _VEC}}},
            {"required": ["name"], "properties": {"name": {"const": "zero"}}}]},
        "sigma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "set": {"type": "object", "required": ["radius"], "properties": {
            "radius": _POS, "n_samples": {"type": "integer", "minimum": 1}, "horizon": _POS}},
        "verify": {"type": "boolean"}}},
    "sgc2": {"required": ["gains", "rho"], "properties": {
        "gains": {"type": "object", "required": ["g12", "g21"],
                  "properties": {"g12": _FN, "g21": _FN, "g1": _FN, "g2": _FN}},
        "rho": _FN,
        "r_grid": {"type": "object", "properties": {"lo": _POS, "hi": _POS,
                                                    "n": {"type": "integer", "minimum": 2}}}}},
    "network_certify": {"required": ["network", "certificate"], "properties": {
        "network": _NETWORK, "certificate": _IMPL, "budget": _BUDGET,
        "path": {"type": "object"}, "rho": _FN}},
    "network_sim": {"required": ["network", "x0", "horizon"], "properties": {
        "network": _NETWORK, "x0": _X0_PROFILE, "input": _INPUT, "horizon": _POS,
        "grid_points": {"type": "integer", "minimum": 2}, "integration": _INTEGRATION,
        "certificate": _IMPL, "path": {"type": "object"}}},
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": sorted(KIND_SCHEMAS)}, "seed": {"type": "integer"},
                   "output_dir": {"type": "string"}},
    "allOf": [{"if": {"properties": {"kind": {"const": k}}, "required": ["kind"]}, "then": s}
              for k, s in KIND_SCHEMAS.items()],
}


def validate_scenario(sc) -> list[str]:
    """Schema errors as ``"/json/pointer: message"`` strings, sorted by pointer."""
    v = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = []
    for e in v.iter_errors(sc):
        leaves = _leaf_errors(e)
        for leaf in leaves:
            ptr = "/" + "/".join(str(p) for p in leaf.absolute_path)
            errors.append(f"{ptr}: {leaf.message}")
    return sorted(set(errors))


def _leaf_errors(e):
    if e.context:
        best = jsonschema.exceptions.best_match(e.context)
        return [best] if best is not None else [e]
    return [e]


# -- settings ----------------------------------------------------------------

def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for key, field_name in ENV_SETTINGS.items():
        raw = environ.get(f"ISSKIT_{key}")
        if raw is None:
            continue
        try:
            val = float(raw)
        except ValueError:
            raise UsageError(f"ISSKIT_{key}={raw!r} is not a number") from None
        if not val > 0:
            raise UsageError(f"ISSKIT_{key} must be positive")
        out[field_name] = val
    return out


def _budget(sc, seed, env, base: probe.SamplingBudget | None = None) -> probe.SamplingBudget:
    b = replace(base or probe.SamplingBudget(), seed=seed, **env)
    given = {k: (tuple(v) if isinstance(v, list) else v) for k, v in sc.get("budget", {}).items()}
    return replace(b, **given)


def _integration(sc, env) -> dict:
    opts = {"rel_tol": env.get("int_rel_tol", 1e-8), "abs_tol": env.get("int_abs_tol", 1e-10),
            "blowup_threshold": env.get("blowup_threshold", 1e12)}
    opts.update(sc.get("integration", {}))
    return opts


def _grid_times(t_end, n):
    return np.linspace(0.0, t_end, n)


# -- scenario runners ---------------------------------------------------------
# Each returns (verdict, results, witnesses, files) where files maps a file
# name to a writer callable.

def _run_simulate(sc, seed, env):
    sys_ = system_from_json(sc["system"])
    u = InputSignal.from_json(sc["input"]) if "input" in sc else None
    opts = _integration(sc, env)
    tr = integrate(sys_, sc["x0"], u, sc["horizon"], **opts)
    n = sc.get("grid_points", 401)
    res = {"status": tr.status, "t_end": tr.t_end, "t_escape": tr.t_escape,
           "x_end": tr.x_end.tolist(), "n_steps": len(tr.t) - 1, "integration": opts}
    ts = np.union1d(tr.t, _grid_times(tr.t_end, n))
    return NO_COUNTEREXAMPLE, res, [], {"trajectory.csv": lambda p: tr.to_csv(p, ts)}


def _run_iss_probe(sc, seed, env):
    sys_ = system_from_json(sc["system"])
    budget = _budget(sc, seed, env)
    results, witnesses, files = [], [], {}
    verdict = NO_COUNTEREXAMPLE
    for k, pr in enumerate(sc["probes"]):
        prop = pr["property"]
        if prop == "ISS":
            est = probe.ISSEstimate(cf.KLFn.from_json(pr["estimate"]["beta"]),
                                    cf.from_json(pr["estimate"]["gamma"]))
            rep = probe.check_iss_estimate(sys_, est, budget)
        elif prop == "ULS":
            rep = probe.check_uls(sys_, cf.from_json(pr["sigma"]), cf.from_json(pr["gamma"]),
                                  pr["r"], budget)
        elif prop == "LIM":
            rep = probe.check_lim(sys_, cf.from_json(pr["gamma"]), budget)
        elif prop == "FC":
            rep = probe.check_forward_completeness(sys_, budget)
        elif prop == "ULIM":
            tab = probe.ulim_times(sys_, cf.from_json(pr["gamma"]), pr.get("eps", (0.05, 0.1, 0.5)),
                                   pr.get("r_grid", (0.1, 1.0, 10.0)), budget)
            results.append({"property": "ULIM", "verdict": NO_COUNTEREXAMPLE if tab.finite
                            else "inconclusive", "table": tab.to_json(), "note": DISCLAIMER})
            continue
        else:
            try:
                g = probe.estimate_asymptotic_gain(sys_, pr["radii"], budget)
            except probe.AsymptoticGainFalsified as exc:
                rep = ProbeReport("AG", FALSIFIED, 0, exc.witness)
            else:
                results.append({"property": "AG", "verdict": NO_COUNTEREXAMPLE,
                                "gain": g.to_json(),
                                "values": {format(r, ".17g"): float(g(r)) for r in pr["radii"]},
                                "note": DISCLAIMER})
                continue
        results.append(rep.to_json())
        if rep.falsified:
            verdict = FALSIFIED
            witnesses.append(rep.witness)
            w = rep.witness
            if w.get("input") is not None and w.get("system"):
                files[f"witness_{len(witnesses) - 1}_trace.csv"] = _witness_trace_writer(w)
    return verdict, results, witnesses, files


def _witness_trace_writer(w):
    def write(path):
        sys_ = system_from_json(w["system"])
        opts = w["integration"]
        tr = integrate(sys_, w["x0"], InputSignal.from_json(w["input"]), opts["horizon"],
                       rel_tol=opts["rel_tol"], abs_tol=opts["abs_tol"],
                       blowup_threshold=opts["blowup_threshold"])
        tr.to_csv(path, np.union1d(tr.t, _grid_times(tr.t_end, opts.get("grid_points", 401))))
    return write


def _run_lyapunov(sc, seed, env):
    if "certificate" in sc:
        sys_ = system_from_json(sc["system"])
        cert = ly.DissipativeCertificate.from_json(sc["certificate"])
        budget = _budget(sc, seed, env)
        rep = ly.check_dissipative(sys_, cert, budget,
                                   n_samples=sc.get("n_samples", min(budget.n_samples, 200)))
    else:
        net = system_from_json(sc["network"])
        if not 0 <= sc["index"] < net.N:
            raise UsageError(f"/index: {sc['index']} outside 0..{net.N - 1}")
        cert = ly.ImplicationCertificate.from_json(sc["implication"])
        rep = ly.check_implication(net.subsystem(sc["index"]), cert,
                                   n_samples=sc.get("n_samples", 2000), seed=seed)
    wit = [rep.witness] if rep.falsified else []
    return rep.verdict, [rep.to_json()], wit, {}


def _run_etc(sc, seed, env):
    setup = etc_mod.ETCSetup(system_from_json(sc["plant"]),
                             etc_mod.feedback_from_json(sc["feedback"]),
                             ly.DissipativeCertificate.from_json(sc["certificate"]), sc["sigma"])
    tr = etc_mod.simulate_etc(setup, sc["x0"], sc["horizon"])
    res = {"trace": tr.summary(), "inter_event_min": tr.inter_event_min, "zeno_flag": tr.zeno_flag,
           "hypothesis_notes": setup.hypothesis_notes()}
    verdict, witnesses = NO_COUNTEREXAMPLE, []
    if sc.get("verify", True):
        rep = etc_mod.verify_decay(tr, setup)
        res["verify_decay"] = rep.to_json()
        if rep.falsified:
            verdict = FALSIFIED
            witnesses.append(rep.witness)
    if "set" in sc:
        st = sc["set"]
        ir = etc_mod.min_interevent_over_set(setup, st["radius"], st.get("n_samples", 100),
                                             st.get("horizon", sc["horizon"]), seed)
        res["tau_hat"] = ir.tau_hat
        res["set"] = ir.to_json()
        if ir.zeno:
            verdict = FALSIFIED
            witnesses.append(ir.witness)
    if tr.zeno_flag:
        verdict = FALSIFIED
        witnesses.append({"kind": "etc_zeno", "setup": setup.to_json(), "x0": tr.x0.tolist(),
                          "horizon": tr.horizon, "n_events": int(len(tr.events))})
    ts = np.union1d(tr.trajectory.t, _grid_times(tr.trajectory.t_end, 401))
    files = {"trajectory.csv": lambda p: tr.trajectory.to_csv(p, ts),
             "events.csv": tr.events_to_csv}
    return verdict, res, witnesses, files


def _run_sgc2(sc, seed, env):
    gains = {k: cf.from_json(v) for k, v in sc["gains"].items()}
    G = sg.GainMatrix2(**gains)
    rho = cf.from_json(sc["rho"])
    rg = sc.get("r_grid", {})
    grid = np.logspace(math.log10(rg.get("lo", 1e-6)), math.log10(rg.get("hi", 1e6)), rg.get("n", 200))
    res = sg.check_sgc_2(G, rho, grid)
    op = sg.sgc_operator_form(sg.GainOperator.two(G.g12, G.g21), rho)
    out = {"grid": res.to_json(), "operator_form": op.to_json(),
           "forms_agree": res.holds == op.holds}
    witnesses = []
    gj = {"g12": G.g12.to_json(), "g21": G.g21.to_json()}
    if not res.holds:
        ip = cf.id_plus(rho)
        r = res.witness
        witnesses.append({"kind": "sgc2", "gains": gj, "rho": rho.to_json(), "r": r,
                          "lhs": float(ip(G.g12(ip(G.g21(r))))), "rhs": r,
                          "margin": float(ip(G.g12(ip(G.g21(r))))) - r, "tolerance": 0.0})
    if not op.holds:
        s = np.asarray(op.witness)
        img = np.asarray(cf.id_plus(rho)(sg.GainOperator.two(G.g12, G.g21).apply(s)))
        witnesses.append({"kind": "sgc_operator", "gains": gj, "rho": rho.to_json(),
                          "s": s.tolist(), "image": img.tolist(),
                          "margin": float(np.min(img - s)), "tolerance": 0.0})
    return (FALSIFIED if witnesses else NO_COUNTEREXAMPLE), out, witnesses, {}


def _network_x0(spec, N):
    if isinstance(spec, list):
        if len(spec) != N:
            raise UsageError(f"/x0: expected {N} components, got {len(spec)}")
        return np.asarray(spec, float)
    return spec.get("amplitude", 1.0) * np.exp(-spec.get("rate", 1.0) * np.arange(N))


NETWORK_BUDGET = probe.SamplingBudget(n_samples=48, horizon=20.0, magnitudes=(0.0, 0.1, 1.0))


def _run_network_certify(sc, seed, env):
    net = system_from_json(sc["network"])
    cert = ly.ImplicationCertificate.from_json(sc["certificate"])
    budget = _budget(sc, seed, env, NETWORK_BUDGET)
    path = sg.DecayPath.from_json(sc["path"]) if "path" in sc else None
    gamma = sg.GainOperator.from_neighbors(net.neighbors, cert.neighbor_gain(0), cert.gamma_iu,
                                           net.boundary)
    if path is None and "rho" in sc:
        try:
            path = sg.synthesize_decay_path(gamma, cf.from_json(sc["rho"]))
        except sg.SynthesisFailure as exc:
            res = {"property": "NETWORK_ISS", "verdict": HYPOTHESIS_VIOLATION,
                   "details": {"decay_path": {"holds": False, "failure": exc.witness}}}
            return HYPOTHESIS_VIOLATION, res, [], {}
    rep = sg.check_network_iss(net, cert, path, budget, gamma=gamma)
    wit = [rep.witness] if rep.falsified else []
    return rep.verdict, rep.to_json(), wit, {}


def _run_network_sim(sc, seed, env):
    net = system_from_json(sc["network"])
    x0 = _network_x0(sc["x0"], net.N)
    u = InputSignal.from_json(sc["input"]) if "input" in sc else None
    opts = _integration(sc, env)
    tr = integrate(net, x0, u, sc["horizon"], **opts)
    ts = np.union1d(tr.t, _grid_times(tr.t_end, sc.get("grid_points", 401)))
    res = {"status": tr.status, "t_end": tr.t_end, "n_steps": len(tr.t) - 1, "integration": opts,
           "state_norm_end": float(net.state_norm(tr.x_end))}
    files = {"trajectory.csv": lambda p: tr.to_csv(p, ts)}
    if "certificate" in sc:
        cert = ly.ImplicationCertificate.from_json(sc["certificate"])
        if "path" in sc:
            path = sg.DecayPath.from_json(sc["path"])
        else:
            path = sg.synthesize_decay_path(sg.GainOperator.line(net.N, cert.neighbor_gain(0),
                                                                  boundary=net.boundary))
        V = sg.composite_lyapunov(cert.V, path, tr.at(ts))
        res["composite_V"] = {"initial": float(V[0]), "final": float(V[-1]),
                              "max_increase": float(np.max(np.diff(V), initial=0.0))}

        def write_v(p):
            import csv
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "V"])
                for t, v in zip(ts, V):
                    w.writerow([format(float(t), ".17g"), format(float(v), ".17g")])
        files["composite_V.csv"] = write_v
    return NO_COUNTEREXAMPLE, res, [], files


RUNNERS = {
    "simulate": _run_simulate,
    "iss_probe": _run_iss_probe,
    "lyapunov_check": _run_lyapunov,
    "etc_sim": _run_etc,
    "sgc2": _run_sgc2,
    "network_certify": _run_network_certify,
    "network_sim": _run_network_sim,
}

_EXIT = {NO_COUNTEREXAMPLE: EXIT_OK, FALSIFIED: EXIT_FALSIFIED,
         HYPOTHESIS_VIOLATION: EXIT_HYPOTHESIS, "inconclusive": EXIT_OK}


def run_scenario(sc: dict, out_dir: Path, seed: int | None = None, environ=None) -> int:
    """Validate and execute one scenario, writing all artifacts to ``out_dir``."""
    errors = validate_scenario(sc)
    if errors:
        raise UsageError("scenario does not match the schema:\n" + "\n".join(errors))
    seed = int(seed if seed is not None else sc.get("seed", 0))
    env = env_overrides(environ)
    try:
        verdict, results, witnesses, files = RUNNERS[sc["kind"]](sc, seed, env)
    except (KeyError, ValueError, TypeError, IndexError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"invalid scenario content: {exc}") from exc
    code = _EXIT.get(verdict, EXIT_OK)
    witnesses = [dict(w, schema=WITNESS_SCHEMA) for w in witnesses if w is not None]
    report = {
        "schema": REPORT_SCHEMA,
        "kind": sc["kind"],
        "seed": seed,
        "verdict": verdict,
        "exit_code": code,
        "note": DISCLAIMER,
        "settings_from_env": env,
        "scenario": sc,
        "results": results,
        "witnesses": witnesses,
        "artifacts": sorted(files) + (["witness.json"] if witnesses else []),
        TIMESTAMP_FIELD: datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, writer in sorted(files.items()):
        writer(out_dir / name)
    if witnesses:
        (out_dir / "witness.json").write_text(dumps(witnesses[0]))
    (out_dir / "report.json").write_text(dumps(report))
    return code


def run_replay(path: Path) -> tuple[int, dict]:
    data = _load_json(path)
    if isinstance(data, dict) and data.get("schema") == REPORT_SCHEMA:
        ws = data.get("witnesses") or []
        if not ws:
            raise UsageError("report contains no witness: nothing to replay")
        data = ws[0]
    try:
        res = replay_witness(data)
    except StaleWitnessError as exc:
        raise UsageError(f"cannot replay: {exc}") from None
    return (EXIT_OK if res.confirmed else EXIT_FALSIFIED), res.to_json()


def _load_json(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isskit", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a scenario file")
    r.add_argument("scenario", type=Path)
    r.add_argument("--out", type=Path, default=None, help="output directory")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    rp = sub.add_parser("replay", help="re-check a witness (or the first witness of a report)")
    rp.add_argument("witness", type=Path)
    sub.add_parser("list-builtins", help="list the named built-in systems")
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "list-builtins":
            for name, (_, desc) in sorted(BUILTINS.items()):
                print(f"{name:26s} {desc}")
            return EXIT_OK
        if args.command == "replay":
            code, res = run_replay(args.witness)
            print(dumps(res), end="")
            return code
        sc = _load_json(args.scenario)
        if not isinstance(sc, dict):
            raise UsageError("scenario must be a JSON object")
        out = args.out or Path(sc.get("output_dir", "out"))
        code = run_scenario(sc, out, args.seed)
        rep = json.loads((out / "report.json").read_text())
        print(f"{sc['kind']}: {rep['verdict']} (exit {code}); report in {out / 'report.json'}")
        return code
    except UsageError as exc:
        print(f"isskit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
