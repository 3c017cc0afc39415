"""Command-line client for the LQR service.

Each subcommand sends one request to the HTTP service and writes the
response to stdout or a file. By default the service app runs in-process,
so no server needs to be started; `--server URL` points the same commands
at a remote instance instead.

Exit codes: 0 success (or thresholds met with --check), 1 usage error,
2 numerical or solver failure, 3 insufficiently rich data.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_DATA = 3

MC_COST_THRESHOLD = 1e-4
MC_GAIN_THRESHOLD = 1e-3
REACTOR_THRESHOLD = 1e-2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from ddlqr.service import app

    # The test client speaks ASGI directly, so no server process is needed.
    return TestClient(app)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code == 200:
        return resp.json()
    try:
        doc = resp.json()
    except ValueError:
        doc = {}
    kind = doc.get("kind")
    detail = doc.get("detail", resp.text)
    if kind == "data_richness":
        raise CliError(detail, EXIT_DATA)
    if kind == "numerical":
        raise CliError(detail, EXIT_NUMERICAL)
    raise CliError(detail, EXIT_USAGE)


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    except ValueError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}")


def _write(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _identity_weights(n: int, m: int, N: int) -> dict:
    eye = lambda d: [[1.0 if i == j else 0.0 for j in range(d)] for i in range(d)]
    return {"Qx": eye(n), "Qf": eye(n), "R": eye(m), "N": N}


def _weights_arg(args, n: int, m: int) -> dict:
    if args.weights:
        return _read_json(args.weights)
    return _identity_weights(n, m, args.N)


def cmd_collect(args, client) -> int:
    system = _read_json(args.system)
    doc = _post(client, "/collect", {"system": system, "T": args.T, "seed": args.seed})
    _write(json.dumps(doc["experiment"]), args.out)
    print(f"persistency of excitation order n+1: {doc['pe_order_ok']}", file=sys.stderr)
    print(f"rank condition: {doc['rank_ok']}", file=sys.stderr)
    return EXIT_OK if doc["rank_ok"] else EXIT_DATA


def cmd_solve(args, client) -> int:
    payload: dict = {"mode": args.mode}
    if args.mode == "mb":
        if not args.system:
            raise CliError("--system is required for mode 'mb'")
        system = _read_json(args.system)
        payload["system"] = system
        n, m = len(system["A"]), len(system["B"][0])
    else:
        if not args.data:
            raise CliError("--data is required for mode 'dd'")
        experiment = _read_json(args.data)
        payload["experiment"] = experiment
        n, m = len(experiment["X0T"]), len(experiment["U0T"])
    payload["weights"] = _weights_arg(args, n, m)
    if args.tolerance:
        payload["tolerances"] = [args.tolerance]
    doc = _post(client, "/solve", payload)
    _write(json.dumps(doc), args.out)
    return EXIT_OK


def cmd_riccati(args, client) -> int:
    system = _read_json(args.system)
    n, m = len(system["A"]), len(system["B"][0])
    payload = {"system": system, "weights": _weights_arg(args, n, m)}
    doc = _post(client, "/riccati", payload)
    _write(json.dumps(doc), args.out)
    return EXIT_OK


def cmd_montecarlo(args, client) -> int:
    payload = {
        "trials": args.trials,
        "n": args.n,
        "m": args.m,
        "T": args.T,
        "N": args.N,
        "seed": args.seed,
    }
    if args.weights:
        payload["weights"] = _read_json(args.weights)
    doc = _post(client, "/montecarlo", payload)
    _write(doc["csv"], args.out)
    summary = doc["summary"]
    if args.summary:
        _write(json.dumps(summary, indent=2, sort_keys=True) + "\n", args.summary)
    if args.check:
        if summary["n_ok"] == 0:
            raise CliError("no trial succeeded", EXIT_NUMERICAL)
        cost = summary["abs_cost_err"]["mean"]
        gain = summary["gain_err"]["mean"]
        ok = cost <= MC_COST_THRESHOLD and gain <= MC_GAIN_THRESHOLD
        print(
            f"check: mean cost err {cost:.3e} (limit {MC_COST_THRESHOLD:.0e}), "
            f"mean gain err {gain:.3e} (limit {MC_GAIN_THRESHOLD:.0e})",
            file=sys.stderr,
        )
        return EXIT_OK if ok else EXIT_NUMERICAL
    return EXIT_OK


def cmd_reactor(args, client) -> int:
    payload = {"seed": args.seed}
    if args.T is not None:
        payload["T"] = args.T
    if args.N is not None:
        payload["N"] = args.N
    doc = _post(client, "/reactor", payload)
    _write(doc["trajectory_csv"], args.out)
    if args.summary:
        record = {k: doc[k] for k in ("status", "J_mb", "J_dd", "abs_cost_err",
                                      "max_gain_err", "mean_gain_err")}
        _write(json.dumps(record, indent=2, sort_keys=True) + "\n", args.summary)
    if args.check:
        ok = (
            doc["abs_cost_err"] <= REACTOR_THRESHOLD
            and doc["mean_gain_err"] <= REACTOR_THRESHOLD
        )
        print(
            f"check: cost err {doc['abs_cost_err']:.3e}, "
            f"mean gain err {doc['mean_gain_err']:.3e} (limit {REACTOR_THRESHOLD:.0e})",
            file=sys.stderr,
        )
        return EXIT_OK if ok else EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddlqr",
        description="Finite-horizon LQR from a model or straight from data.",
    )
    parser.add_argument("--config", help="JSON file of defaults; flags override it")
    parser.add_argument("--server", help="URL of a running service; default is in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="run an experiment and write the data matrices")
    p.add_argument("--system", required=True, help="system JSON file")
    p.add_argument("--T", type=int, default=15, help="experiment length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("solve", help="solve the LQR program (model-based or data-driven)")
    p.add_argument("--mode", required=True, choices=["mb", "dd"])
    p.add_argument("--system", help="system JSON file (mode mb)")
    p.add_argument("--data", help="experiment JSON file (mode dd)")
    p.add_argument("--weights", help="weights JSON file; identity weights if omitted")
    p.add_argument("--N", type=int, default=10, help="horizon when --weights is omitted")
    p.add_argument("--tolerance", type=float, help="solver gap tolerance override")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("riccati", help="classical backward-recursion solution")
    p.add_argument("--system", required=True, help="system JSON file")
    p.add_argument("--weights", help="weights JSON file; identity weights if omitted")
    p.add_argument("--N", type=int, default=10, help="horizon when --weights is omitted")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_riccati)

    p = sub.add_parser("montecarlo", help="compare both programs over random systems")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--T", type=int, default=15)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--weights", help="weights JSON file; identity weights if omitted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--summary", help="summary JSON output path")
    p.add_argument("--check", action="store_true",
                   help="exit nonzero unless mean errors are under thresholds")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("reactor", help="batch reactor case study")
    p.add_argument("--T", type=int, help="experiment length (default 15)")
    p.add_argument("--N", type=int, help="horizon (default 10)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="trajectory CSV output path (default stdout)")
    p.add_argument("--summary", help="result JSON output path")
    p.add_argument("--check", action="store_true",
                   help="exit nonzero unless errors are under thresholds")
    p.set_defaults(func=cmd_reactor)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    config = _read_json(args.config)
    if not isinstance(config, dict):
        raise CliError(f"{args.config} must contain a JSON object")
    defaults = parser.parse_args([a for a in argv if a != "--config"
                                  and a != args.config])
    known = set(vars(defaults))
    unknown = set(config) - known
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    # Flags given on the command line win over config values.
    explicit = _explicit_flags(argv)
    for key, value in config.items():
        if key not in explicit:
            setattr(args, key, value)
    return args


def _explicit_flags(argv: list) -> set:
    flags = set()
    for token in argv:
        if token.startswith("--"):
            flags.add(token[2:].split("=", 1)[0].replace("-", "_"))
    return flags


def main(argv: list | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        with _client(args.server) as client:
            return args.func(args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
