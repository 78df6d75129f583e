#!/usr/bin/env python3

import logging
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Dict, List

import pandas as pd

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parent
CONFIGS = ROOT / "configs"


class AcceptanceRunner:

    def __init__(self, workdir: Path, threads: int = 2):
        self.workdir = workdir
        self.threads = threads

    def _run(self, command: str, config: str, out: str, *extra: str) -> int:
        args = [sys.executable, "-m", "src.cli", command, "--config", str(CONFIGS / config),
                "--out", str(self.workdir / out), "--threads", str(self.threads), *extra]
        logger.info(f"Running: {' '.join(args[2:])}")
        completed = subprocess.run(args, cwd=ROOT, capture_output=True, text=True)
        if completed.returncode != 0:
            logger.info(f"  stderr tail: {completed.stderr.strip().splitlines()[-1:]}")
        return completed.returncode

    def test_verify(self) -> List[bool]:
        scenarios = [
            ("default.env", "verify_default", 0),
            ("free.env", "verify_free", 0),
            ("correlated.env", "verify_correlated", 0),
        ]
        results = []
        for config, out, expected in scenarios:
            code = self._run("verify", config, out)
            logger.info(f"  {config}: exit {code} (expected {expected})")
            results.append(code == expected)
        return results

    def test_sweeps(self) -> List[bool]:
        results = []
        for config, out in (("default.env", "sweep_default"), ("correlated.env", "sweep_correlated")):
            code = self._run("sweep", config, out)
            summary = (self.workdir / out / "summary.txt")
            verdict = summary.read_text().strip().splitlines()[-1] if summary.exists() else "missing"
            logger.info(f"  {config}: exit {code}, {verdict}")
            results.append(code == 0)

        code = self._run("sweep", "free.env", "sweep_free")
        records = pd.read_csv(self.workdir / "sweep_free" / "records.csv")
        exact = bool((records["value"] <= records["tail_floor"].clip(lower=1e-12)).all())
        logger.info(f"  free.env: exit {code}, all distances zero: {exact}")
        results.append(code == 0 and exact)
        return results

    def test_evolve(self) -> List[bool]:
        results = []
        code = self._run("evolve", "pure_state.env", "evolve_pure")
        trajectory = pd.read_csv(self.workdir / "evolve_pure" / "trajectory.csv")
        purity_gap = float((trajectory["purity"] - trajectory["trace"]).abs().max())
        logger.info(f"  pure_state.env: exit {code}, purity gap {purity_gap:.2e}")
        results.append(code == 0 and purity_gap <= 1e-6)

        code = self._run("evolve", "free.env", "evolve_free")
        trajectory = pd.read_csv(self.workdir / "evolve_free" / "trajectory.csv")
        free_gap = float(trajectory["free_distance"].max())
        logger.info(f"  free.env: exit {code}, distance to free flow {free_gap:.2e}")
        results.append(code == 0 and free_gap <= 1e-6)
        return results

    def test_reproducibility(self) -> List[bool]:
        first = self._run("sweep", "default.env", "repro_a")
        second = self._run("sweep", "default.env", "repro_b")
        same = (self.workdir / "repro_a" / "records.csv").read_bytes() == \
            (self.workdir / "repro_b" / "records.csv").read_bytes()
        logger.info(f"  identical records.csv: {same}")
        return [first == 0 and second == 0 and same]

    def run_all_tests(self) -> Dict[str, List[bool]]:
        logger.info("Starting acceptance runs...")
        return {
            "Verify": self.test_verify(),
            "Sweeps": self.test_sweeps(),
            "Evolve": self.test_evolve(),
            "Reproducibility": self.test_reproducibility(),
        }


def main() -> int:
    with tempfile.TemporaryDirectory() as workdir:
        results = AcceptanceRunner(Path(workdir)).run_all_tests()

    logger.info("=" * 80)
    logger.info("ACCEPTANCE RESULTS")
    logger.info("=" * 80)

    total_tests = 0
    total_passed = 0

    for category, test_results in results.items():
        passed = sum(test_results)
        total = len(test_results)
        total_tests += total
        total_passed += passed
        status = "PASS" if passed == total else "FAIL"
        logger.info(f"{status} {category}: {passed}/{total}")

    logger.info(f"Overall: {total_passed}/{total_tests} runs passed")
    return 0 if total_passed == total_tests else 1


if __name__ == "__main__":
    sys.exit(main())
