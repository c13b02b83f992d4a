"""Supervised training data: solve under a budget, harvest glue-count labels,
split oversized problems, and augment by dumping learned clauses.
"""

from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .cnf import Formula, clause_literal_graph, parse_dimacs, random_split, write_dimacs
from .solver import Budget, Solver
from .training import SupervisedExample

__all__ = [
    "DatagenConfig",
    "augment",
    "build_dataset",
    "generate_datapoint",
    "load_dataset",
]


def generate_datapoint(formula: Formula, budget: Budget | None = None) -> SupervisedExample | None:
    """Vanilla solve to budget, then pair the formula's graph with its glue
    counts; None when no glue clause was ever learned."""
    budget = budget or Budget(max_conflicts=20_000)
    result = Solver(formula).solve(budget=budget)
    counts = tuple(result.stats.glue_counts)
    if not any(counts):
        return None
    return SupervisedExample(graph=clause_literal_graph(formula), glue_counts=counts)


def augment(formula: Formula, dump_interval: int = 5000, budget: Budget | None = None) -> list[Formula]:
    """Snapshots of original plus currently retained learned clauses, taken
    every dump_interval conflicts during a vanilla solve."""
    if dump_interval < 1:
        raise ValueError("dump_interval must be >= 1")
    budget = budget or Budget(max_conflicts=20_000)
    dumps = []

    def on_conflict(solver):
        if solver.conflicts % dump_interval == 0:
            clauses = [tuple(c.lits) for c in solver.original]
            clauses.extend(tuple(c.lits) for c in solver.learned)
            dumps.append(Formula(formula.num_vars, tuple(clauses)))

    Solver(formula).solve(budget=budget, on_conflict=on_conflict)
    return dumps


@dataclass
class DatagenConfig:
    budget_conflicts: int | None = 20_000
    budget_seconds: float | None = None     # wall-clock mode (nondeterministic)
    dump_interval: int = 5000
    max_clauses: int = 150_000
    seed: int = 0
    workers: int = 1
    augment: bool = True


def _file_seed(master: int, name: str) -> int:
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _emit(formula, budget, out_dir, stem, rows, source, split_path, dump_index, seed):
    example = generate_datapoint(formula, budget)
    if example is None:
        return
    cnf_path = out_dir / f"{stem}.cnf"
    cnf_path.write_text(write_dimacs(formula))
    counts_path = out_dir / f"{stem}.counts"
    counts_path.write_text("\n".join(str(c) for c in example.glue_counts) + "\n")
    rows.append(
        {
            "example": stem,
            "source": source,
            "split_path": split_path,
            "dump_index": dump_index,
            "seed": seed,
            "num_vars": formula.num_vars,
            "num_clauses": formula.num_clauses,
        }
    )


def _process_file(args):
    path, out_dir, cfg = args
    out_dir = Path(out_dir)
    rows = []
    try:
        formula = parse_dimacs(Path(path).read_text())
    except (OSError, ValueError) as exc:
        return [], f"{path}: {exc}"
    seed = _file_seed(cfg.seed, Path(path).name)
    budget = Budget(max_conflicts=cfg.budget_conflicts, max_seconds=cfg.budget_seconds)
    pieces = random_split(formula, cfg.max_clauses, seed)
    stem_base = Path(path).stem
    for pi, piece in enumerate(pieces):
        split_path = " ".join(str(l) for l in piece.fixed)
        _emit(piece.formula, budget, out_dir, f"{stem_base}__p{pi:03d}", rows,
              Path(path).name, split_path, 0, seed)
        if cfg.augment:
            for di, dump in enumerate(augment(piece.formula, cfg.dump_interval, budget), start=1):
                _emit(dump, budget, out_dir, f"{stem_base}__p{pi:03d}_d{di:02d}", rows,
                      Path(path).name, split_path, di, seed)
    return rows, None


_MANIFEST_FIELDS = ["example", "source", "split_path", "dump_index", "seed", "num_vars", "num_clauses"]


def build_dataset(input_dir, output_dir, config: DatagenConfig | None = None) -> list[dict]:
    """Run the full pipeline over a directory of DIMACS files.

    Writes one ``<stem>.cnf`` + ``<stem>.counts`` pair per emitted example and
    a ``manifest.csv`` recording provenance; returns the manifest rows.
    Unreadable files are skipped with a note in ``errors.log``.
    """
    cfg = config or DatagenConfig()
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(str(p) for p in Path(input_dir).glob("*.cnf"))
    tasks = [(f, str(out_dir), cfg) for f in files]
    rows = []
    errors = []
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_process_file, tasks))
    else:
        results = [_process_file(t) for t in tasks]
    for file_rows, err in results:
        rows.extend(file_rows)
        if err:
            errors.append(err)
    with open(out_dir / "manifest.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    if errors:
        (out_dir / "errors.log").write_text("\n".join(errors) + "\n")
    return rows


def load_dataset(dataset_dir) -> list[SupervisedExample]:
    """Read back examples written by build_dataset (manifest order)."""
    dataset_dir = Path(dataset_dir)
    manifest = dataset_dir / "manifest.csv"
    examples = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            formula = parse_dimacs((dataset_dir / f"{row['example']}.cnf").read_text())
            counts = tuple(
                int(line)
                for line in (dataset_dir / f"{row['example']}.counts").read_text().split()
            )
            examples.append(SupervisedExample(graph=clause_literal_graph(formula), glue_counts=counts))
    return examples
