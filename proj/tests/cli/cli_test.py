"""End-to-end checks of the emmfit command line.

Usage: cli_test.py <emmfit binary> <schema dir> <scratch dir>
"""

import csv
import filecmp
import json
import math
import shutil
import subprocess
import sys
import unittest
from pathlib import Path

import jsonschema
from referencing import Registry, Resource

EMMFIT = SCHEMAS = WORK = None


def schema_validator(name):
    registry = Registry()
    for path in SCHEMAS.glob("*.schema.json"):
        doc = json.loads(path.read_text())
        registry = registry.with_resource(doc["$id"], Resource.from_contents(doc))
        registry = registry.with_resource(path.name, Resource.from_contents(doc))
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    return jsonschema.Draft202012Validator(schema, registry=registry)


def validate(doc, name):
    schema_validator(name).validate(doc)


def run(*args, expect=0):
    proc = subprocess.run([str(EMMFIT), *map(str, args)], cwd=WORK, capture_output=True, text=True)
    if expect is not None and proc.returncode != expect:
        raise AssertionError(f"emmfit {' '.join(map(str, args))} exited {proc.returncode}\n{proc.stderr}")
    return proc


def load(name):
    return json.loads((WORK / name).read_text())


def read_rows(name):
    with open(WORK / name, newline="") as f:
        return list(csv.reader(f))


class Gen(unittest.TestCase):
    def test_shape_truth_and_seed(self):
        proc = run("gen", "--m", 2, "--k", 3, "--n", 10000, "--ecc", 10, "--sep", 10, "--seed", 7,
                   "--out", "g7.csv", "--truth", "g7.json")
        self.assertIn("seed 7", proc.stdout)
        rows = read_rows("g7.csv")
        self.assertEqual(len(rows), 10000)
        self.assertTrue(all(len(r) == 2 for r in rows))
        truth = load("g7.json")
        validate(truth, "model")
        self.assertEqual((truth["k"], truth["m"]), (3, 2))

    def test_same_seed_is_byte_identical(self):
        run("gen", "--m", 3, "--k", 2, "--n", 500, "--seed", 11, "--out", "a.csv", "--truth", "a.json")
        run("gen", "--m", 3, "--k", 2, "--n", 500, "--seed", 11, "--out", "b.csv", "--truth", "b.json")
        self.assertTrue(filecmp.cmp(WORK / "a.csv", WORK / "b.csv", shallow=False))
        self.assertTrue(filecmp.cmp(WORK / "a.json", WORK / "b.json", shallow=False))

    def test_single_component(self):
        run("gen", "--m", 2, "--k", 1, "--n", 100, "--seed", 3, "--out", "k1.csv", "--truth", "k1.json")
        truth = load("k1.json")
        self.assertEqual(truth["k"], 1)
        self.assertEqual(truth["pi"], [1.0])

    def test_invalid_arguments_exit_2(self):
        self.assertEqual(run("gen", "--ecc", 0.5, expect=None).returncode, 2)
        self.assertEqual(run("gen", "--sep", 0, "--out", "x.csv", "--truth", "x.json", expect=None).returncode, 2)


class Fit(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        run("gen", "--m", 2, "--k", 3, "--n", 3000, "--seed", 5, "--out", "fit.csv", "--truth", "fit_truth.json")

    def test_kotz_dadam_lowers_cost(self):
        run("fit", "--family", "kotz", "a=1", "b=0.5", "s=1", "--k", 3, "--opt", "dadam", "--lr", 0.1,
            "--iters", 2000, "--seed", 1, "--out-model", "kotz_model.json", "--out-report", "kotz_report.json",
            "--out-trace", "kotz_trace.csv", "fit.csv")
        report = load("kotz_report.json")
        validate(report, "fit_report")
        validate(load("kotz_model.json"), "model")
        self.assertLess(report["final_cost"], report["initial_cost"])
        self.assertFalse(report["failed"])
        rows = read_rows("kotz_trace.csv")
        self.assertEqual(rows[0], ["iteration", "sliced_cost", "evaluated", "nll", "wall_ms"])
        self.assertEqual(len(rows), 1 + 2000)
        # The per-iteration costs trend downwards: last tenth below first tenth.
        costs = [float(r[1]) for r in rows[1:]]
        self.assertLess(sum(costs[-200:]), sum(costs[:200]))

    def test_em_nll_trace_nonincreasing(self):
        run("fit", "--opt", "em", "--k", 3, "--iters", 200, "--nll-every", 1, "--seed", 2,
            "--out-model", "em_model.json", "--out-report", "em_report.json", "--out-trace", "em_trace.csv",
            "fit.csv")
        validate(load("em_report.json"), "fit_report")
        nll = [float(r[3]) for r in read_rows("em_trace.csv")[1:]]
        self.assertGreater(len(nll), 1)
        for before, after in zip(nll, nll[1:]):
            self.assertLessEqual(after, before + 1e-10)

    def test_zero_step_returns_initialization(self):
        run("fit", "--opt", "dadam", "--lr", 0, "--iters", 50, "--init-model", "fit_truth.json",
            "--out-model", "lr0.json", "--out-report", "lr0_report.json", "--out-trace", "lr0.csv", "fit.csv")
        start, end = load("fit_truth.json"), load("lr0.json")
        for key in ("pi", "mu", "sigma"):
            a, b = _flatten(start[key]), _flatten(end[key])
            self.assertTrue(all(math.isclose(x, y, rel_tol=1e-12, abs_tol=1e-12) for x, y in zip(a, b)), key)

    def test_trace_stride(self):
        run("fit", "--iters", 100, "--trace-every", 25, "--out-model", "s.json", "--out-report", "s_r.json",
            "--out-trace", "s.csv", "fit.csv")
        self.assertEqual([r[0] for r in read_rows("s.csv")[1:]], ["25", "50", "75", "100"])

    def test_bad_family_and_missing_file(self):
        self.assertEqual(run("fit", "--family", "kotz", "a=1", "fit.csv", expect=None).returncode, 2)
        self.assertEqual(run("fit", "missing.csv", expect=None).returncode, 2)
        self.assertEqual(run("fit", "--opt", "em", "--family", "logistic", "--iters", 5, "fit.csv",
                             expect=None).returncode, 2)


class Eval(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        run("gen", "--m", 2, "--k", 1, "--n", 20000, "--seed", 9, "--out", "e1.csv", "--truth", "e1.json")
        run("gen", "--m", 2, "--k", 3, "--n", 2000, "--seed", 4, "--out", "e3.csv", "--truth", "e3.json")

    def test_truth_against_own_sample(self):
        run("eval", "--model", "e1.json", "--data", "e1.csv", "--out", "ev1.json")
        doc = load("ev1.json")
        validate(doc, "eval_data")
        self.assertLess(doc["models"][0]["wass"], 0.02)

    def test_model_against_itself(self):
        run("eval", "--model", "e3.json", "--model2", "e3.json", "--out", "ev_mm.json")
        doc = load("ev_mm.json")
        validate(doc, "eval_models")
        self.assertEqual(doc["d_u"], 0.0)
        self.assertEqual(doc["plan"], [0, 1, 2])
        self.assertTrue(doc["exact"])

    def test_aggregate_fields_over_reports(self):
        for seed in (1, 2, 3):
            run("fit", "--opt", "em", "--k", 3, "--iters", 100, "--seed", seed, "--out-model", f"r{seed}.json",
                "--out-report", f"rep{seed}.json", "--out-trace", f"t{seed}.csv", "e3.csv")
        run("eval", "--model", "rep1.json", "--model", "rep2.json", "--model", "rep3.json", "--data", "e3.csv",
            "--out", "ev_agg.json")
        doc = load("ev_agg.json")
        validate(doc, "eval_data")
        for key in ("wass_mean", "wass_std", "nll_mean", "nll_std", "fail_ratio"):
            self.assertIn(key, doc)
        self.assertEqual(doc["fail_ratio"], 0.0)

    def test_dimension_mismatch(self):
        (WORK / "one_col.csv").write_text("1\n2\n3\n")
        self.assertEqual(run("eval", "--model", "e3.json", "--data", "one_col.csv", expect=None).returncode, 2)


class Bench(unittest.TestCase):
    ARGS = ("bench", "--shapes", "2x3", "--opts", "dadam,em", "--datasets", 3, "--inits", 3, "--alphas",
            "0.01,0.03", "--n", 500, "--iters", 60, "--em-iters", 50, "--seed", 4, "--quiet")

    def test_counts_schema_and_determinism(self):
        run(*self.ARGS, "--out", "bench_a", "--traces")
        run(*self.ARGS, "--out", "bench_b")
        agg = load("bench_a/aggregate.json")
        validate(agg, "bench_aggregate")
        validate(load("bench_a/timing.json"), "bench_timing")
        self.assertEqual(len(agg["cells"]), 2)
        self.assertEqual(sum(c["runs"] for c in agg["cells"]), 18)
        self.assertEqual(len(read_rows("bench_a/runs.csv")), 1 + 18)
        self.assertEqual(len(list((WORK / "bench_a" / "traces").glob("*.csv"))), 18)
        self.assertTrue(filecmp.cmp(WORK / "bench_a/aggregate.json", WORK / "bench_b/aggregate.json",
                                    shallow=False))


def _flatten(x):
    if isinstance(x, list):
        return [y for item in x for y in _flatten(item)]
    return [x]


if __name__ == "__main__":
    EMMFIT, SCHEMAS, WORK = Path(sys.argv[1]).resolve(), Path(sys.argv[2]).resolve(), Path(sys.argv[3]).resolve()
    shutil.rmtree(WORK, ignore_errors=True)
    WORK.mkdir(parents=True)
    unittest.main(argv=sys.argv[:1], verbosity=2)
