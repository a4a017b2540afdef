"""Command line: ``spandt run`` and ``spandt verify``.

Exit codes: 0 success, 1 some run below 2/3 (or a failing suite), 2 usage,
3 unreadable input, 4 bad parameters, 5 memory budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import _backend, dtree, problems, qsim, report, spanprog, verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PARSE, EXIT_PARAM, EXIT_MEMORY = range(6)


class ParseError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem: str = "first-marked"
    n: int | None = None
    graph: str | None = None
    tree: str | None = None
    x: str | None = None
    seed: int | None = None
    edge_prob: float = 0.5
    epsilon: float = 0.05
    mode: str = "exact"
    paper_faithful: bool = False
    memory_budget: str | int | None = None
    backend: str | None = None
    output: str | None = None

    def validate(self):
        if not 0 < self.epsilon <= 0.2:
            raise qsim.ParameterError(f"epsilon must lie in (0, 0.2], got {self.epsilon}")
        if self.mode not in ("exact", "ancilla"):
            raise qsim.ParameterError(f"mode must be 'exact' or 'ancilla', got {self.mode!r}")
        if self.memory_budget is not None:
            qsim.memory_budget(self.memory_budget)
        if not 0 <= self.edge_prob <= 1:
            raise qsim.ParameterError("edge probability must lie in [0, 1]")
        if self.problem not in problems.PROBLEMS + ("tree",):
            raise qsim.ParameterError(f"unknown problem {self.problem!r}")
        if self.backend is not None:
            try:
                _backend.resolve(self.backend)
            except (ValueError, RuntimeError) as exc:
                raise qsim.ParameterError(str(exc)) from None
        return self


def load_config(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        if path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            data = tomllib.loads(raw.decode())
        else:
            data = json.loads(raw)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("config must be a table/object")
    names = {f.name for f in fields(ExperimentConfig)}
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - names
    if unknown:
        raise ParseError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


# -- run ---------------------------------------------------------------------------

def _cases(cfg):
    """``(tree, decode, domain_xs, runs)`` with runs as ``(label, x, reference)``."""
    if cfg.problem == "tree":
        if not cfg.tree:
            raise qsim.ParameterError("--problem tree needs --tree FILE")
        try:
            with open(cfg.tree) as fh:
                t = dtree.loads(fh.read())
        except (OSError, dtree.TreeError, ValueError) as exc:
            raise ParseError(f"cannot read tree {cfg.tree}: {exc}") from None
        xs = list(dtree.leaf_inputs(t).values()) if t.ell**t.n > 4096 else list(dtree.all_inputs(t.n, t.ell))
        runs = [(list(x), x, t.leaf_label[dtree.evaluate(t, x)[0]]) for x in xs]
        return t, (lambda lab: lab), xs, runs
    if cfg.problem == "first-marked":
        if cfg.x is not None:
            try:
                x = tuple(int(c) for c in cfg.x.strip())
            except ValueError:
                raise ParseError(f"input must be a bit string, got {cfg.x!r}") from None
            if any(q not in (0, 1) for q in x) or not x:
                raise ParseError(f"input must be a bit string, got {cfg.x!r}")
            n = len(x)
        elif cfg.n is None:
            raise qsim.ParameterError("first-marked needs --n or --x")
        else:
            n = cfg.n
        if n < 1:
            raise qsim.ParameterError("n must be positive")
        fe = problems.frontend("first-marked", n)
        sel = [x] if cfg.x is not None else fe.domain_inputs()
        runs = [(list(x), x, problems.first_marked(x)) for x in sel]
        return fe.tree, fe.decode, fe.domain_inputs(), runs
    if cfg.graph:
        try:
            graphs = [problems.load_graph(cfg.graph)]
        except (OSError, problems.GraphFormatError) as exc:
            raise ParseError(f"cannot read graph {cfg.graph}: {exc}") from None
    elif cfg.seed is not None:
        if cfg.n is None:
            raise qsim.ParameterError("a generated graph needs --n")
        rng = np.random.default_rng(cfg.seed)
        graphs = [problems.random_graph(cfg.n, cfg.edge_prob, rng)]
    else:
        if cfg.n is None:
            raise qsim.ParameterError(f"{cfg.problem} needs --n, --graph or --seed")
        graphs = None
    n = graphs[0].n if graphs else cfg.n
    if n < 2:
        raise qsim.ParameterError("graph problems need at least 2 vertices")
    domain = None if n <= 4 else graphs
    try:
        fe = problems.frontend(cfg.problem, n, domain)
    except MemoryError as exc:
        raise qsim.MemoryBudgetError(str(exc)) from None
    sel = [(g, g.to_input()) for g in graphs] if graphs else fe.domain
    runs = [([list(e) for e in sorted((u + 1, v + 1) for u, v in g.edges)], x, fe.reference(g))
            for g, x in sel]
    return fe.tree, fe.decode, fe.domain_inputs(), runs


def _tree_witness_sizes(tree, xs):
    t = tree if tree.is_binary else dtree.binarize(tree)
    sp_ = spanprog.build_binary_sp(t)
    wp = wn = 0.0
    for x in xs:
        w = spanprog.witnesses(sp_, x)
        wp, wn = max(wp, w.wsize_pos), max(wn, w.wsize_neg)
    return {"wsize_pos": wp, "wsize_neg": wn, "W": math.sqrt(wp * wn)}


def _json_answer(a):
    if isinstance(a, tuple):
        return [_json_answer(v) for v in a]
    return a


def run_experiment(cfg):
    """Execute one configuration; returns ``(report_dict, exit_code)``."""
    cfg.validate()
    tree, decode, xs, runs = _cases(cfg)
    inst = qsim.compile_instance(tree, cfg.epsilon, pad_pow2=cfg.paper_faithful,
                                 backend=cfg.backend, xs=xs)
    entries, post = [], []
    for label, x, ref in runs:
        rep = qsim.run(inst, x, cfg.mode, budget=cfg.memory_budget)
        ans = None if rep.top_answer is None else decode(rep.top_answer)
        entries.append(report.run_entry(rep, _json_answer(ans), _json_answer(ref), label))
        post.append({"input": label, "answer": _json_answer(ans)})
    params = qsim.detect_params(inst.theta(), inst.eps)
    bst, sst = dtree.stats(inst.tree), dtree.stats(tree)
    succ = [e["success"] for e in entries]
    doc = {
        "schema": report.SCHEMA,
        "command": "run",
        "parameters": {
            "problem": cfg.problem, "n": tree.n if cfg.problem == "tree" else (cfg.n if cfg.n is not None else None),
            "epsilon": cfg.epsilon, "mode": cfg.mode, "paper_faithful": cfg.paper_faithful,
            "theta": params.theta, "delta": params.delta, "W": inst.W,
            "registers": params.registers, "register_dim": params.dim,
            "ancilla_qubits": params.ancilla_qubits, "controlled_u": params.controlled_u,
            "controlled_u_budget": params.budget, "c_budget": qsim.C_BUDGET,
            "seed": cfg.seed, "edge_prob": cfg.edge_prob if cfg.seed is not None else None,
            "backend": inst.backend,
        },
        "tree": {"vertices": len(tree), "T": sst.T, "G": sst.G,
                 "binarized_vertices": len(inst.tree), "binarized_T": bst.T, "binarized_G": bst.G},
        "witness_sizes": {
            "tree_program": _tree_witness_sizes(tree, xs),
            "decision_graph": {"wsize_pos": inst.wsize_pos, "wsize_neg": inst.wsize_neg, "W": inst.W},
        },
        "kernel": {
            "rows": inst.dg.n_rows, "columns": inst.dg.n_cols, "cycles": len(inst.dg.cycles),
            "basis_vectors": 1 + len(inst.tree.leaves) + sum(len(c) for c in inst.dg.cycles),
            "flops_per_reflection": inst.plan.flops("python"),
        },
        "runs": entries,
        "postprocess": post,
        "summary": {
            "runs": len(entries), "min_success": min(succ),
            "all_correct": all(e["correct"] for e in entries),
            "all_above_two_thirds": all(s >= 2 / 3 for s in succ),
            "success_bound": 1 - 16 * cfg.epsilon**2,
        },
    }
    return doc, EXIT_OK if doc["summary"]["all_above_two_thirds"] else EXIT_FAIL


# -- argument handling ----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="spandt", description="Span programs from colored decision trees.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate the quantum algorithm and write a JSON report")
    r.add_argument("--config", help="JSON or TOML file with any of the options below")
    r.add_argument("--problem", choices=problems.PROBLEMS + ("tree",))
    r.add_argument("--n", type=int)
    r.add_argument("--graph", help="adjacency-matrix or edge-list file")
    r.add_argument("--tree", help="tree file (for --problem tree)")
    r.add_argument("--x", help="single first-marked input as a bit string")
    r.add_argument("--seed", type=int, help="generate a random graph with this seed")
    r.add_argument("--edge-prob", type=float)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--mode", choices=("exact", "ancilla"))
    r.add_argument("--paper-faithful", action="store_const", const=True,
                   help="pad black cycles to powers of two")
    r.add_argument("--memory-budget", help="bytes, optionally with K/M/G suffix")
    r.add_argument("--backend", choices=("python", "cython"))
    r.add_argument("--output", "-o", help="report path (default: stdout)")
    v = sub.add_parser("verify", help="run the invariant suites")
    v.add_argument("--quick", action="store_true", help="small instances only")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--corrupt", action="store_true", help="flip one matrix entry (negative control)")
    return p


def _config_from_args(args):
    data = load_config(args.config) if args.config else {}
    for f in fields(ExperimentConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            data[f.name] = val
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ParseError(str(exc)) from None


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        results = verify.run_suites(quick=args.quick, seed=args.seed, corrupt=args.corrupt)
        print(verify.format_table(results))
        return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL
    try:
        cfg = _config_from_args(args)
        doc, code = run_experiment(cfg)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except qsim.ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except qsim.MemoryBudgetError as exc:
        print(f"memory budget: {exc}", file=sys.stderr)
        return EXIT_MEMORY
    text = report.dumps(doc)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    s = doc["summary"]
    print(f"{s['runs']} runs, min success {s['min_success']:.6f}, all correct: {s['all_correct']}",
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
