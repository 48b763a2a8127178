#!/usr/bin/env python3
"""
Master run script for lagcal.
Checks the environment, then runs single scenarios, the acceptance suite or the tester suites.
"""

import sys
import argparse
import importlib
import json
from pathlib import Path
from typing import Dict, List, Optional


class LagCalRunner:
    """Main runner class for lagcal."""

    REQUIRED_PACKAGES = ("numpy", "scipy", "pandas", "sympy", "joblib")

    def __init__(self, base_dir: str = None):
        """Initialize runner."""
        self.base_dir = Path(base_dir) if base_dir else Path(__file__).parent
        self.package_dir = self.base_dir / "lagcal"
        self.data_dir = self.package_dir / "data"
        self.scenario_dir = self.data_dir / "scenarios"
        self.manifest = self.data_dir / "acceptance_manifest.json"
        self.output_dir = self.base_dir / "output"

        # Status tracking
        self.run_status = {
            "prerequisites": False,
            "scenarios": False,
            "tests": False,
        }

    def print_banner(self):
        """Print runner banner."""
        print("📐" + "=" * 60 + "📐")
        print("              LAGCAL SCENARIO RUNNER")
        print("   Lagrangian path functionals on flat model manifolds")
        print("📐" + "=" * 60 + "📐")
        print()

    def check_prerequisites(self) -> bool:
        """Check if all prerequisites are met."""
        print("🔍 Checking prerequisites...")

        if sys.version_info < (3, 8):
            print("❌ Python 3.8+ required")
            return False
        print("✅ Python version OK")

        missing = []
        for package in self.REQUIRED_PACKAGES:
            try:
                importlib.import_module(package)
            except ImportError:
                missing.append(package)
        if missing:
            print(f"❌ Missing packages: {', '.join(missing)} (pip install -r requirements.txt)")
            return False
        print("✅ Numerical stack available")

        if not self.package_dir.exists():
            print("❌ lagcal package not found")
            return False
        print("✅ lagcal package found")

        if not self.manifest.exists():
            print("❌ Acceptance manifest not found")
            return False
        print(f"✅ {len(self.available_scenarios())} shipped scenarios found")

        if not self.output_dir.exists():
            print("⚠️ Output directory not found, creating...")
            self.output_dir.mkdir(parents=True, exist_ok=True)
        print("✅ Output directory ready")

        self.run_status["prerequisites"] = True
        return True

    def available_scenarios(self) -> List[Path]:
        return sorted(self.scenario_dir.glob("*.json"))

    def list_scenarios(self):
        """Print the shipped scenarios with their verbs."""
        print("\n📋 Shipped scenarios")
        print("=" * 40)
        for path in self.available_scenarios():
            data = json.loads(path.read_text())
            print(f"  {path.stem:<22} {data['verb']:<16} {data.get('description', '')}")

    def _cli_args(self, resolution: Optional[int], tolerances: List[str], seed: Optional[int],
                  verbose: bool) -> List[str]:
        args = []
        if resolution is not None:
            args += ["--resolution", str(resolution)]
        for item in tolerances:
            args += ["--tolerance", item]
        if seed is not None:
            args += ["--seed", str(seed)]
        if verbose:
            args.append("--verbose")
        return args

    def run_scenario(self, scenario: str, output_dir: Optional[str] = None, **options) -> int:
        """Run one scenario by shipped name or config path; returns the CLI exit code."""
        from lagcal.cli import main as cli_main

        path = Path(scenario)
        if not path.exists():
            path = self.scenario_dir / f"{scenario}.json"
        if not path.exists():
            print(f"❌ Scenario {scenario} not found")
            return 2

        print(f"\n🧮 Running scenario {path.stem}")
        print("=" * 40)
        target = output_dir or str(self.output_dir / path.stem)
        code = cli_main([str(path), "--output-dir", target] + self._cli_args(**options))
        self.run_status["scenarios"] = code == 0
        return code

    def run_acceptance(self, parallelism: int = 1, output_dir: Optional[str] = None, **options) -> int:
        """Run the acceptance manifest; returns the CLI exit code."""
        from lagcal.cli import main as cli_main

        print("\n🚀 Running acceptance suite")
        print("=" * 40)
        target = output_dir or str(self.output_dir / "acceptance")
        code = cli_main(["--manifest", str(self.manifest), "--output-dir", target,
                         "--parallelism", str(parallelism)] + self._cli_args(**options))
        self.run_status["scenarios"] = code == 0
        return code

    def run_tests(self) -> bool:
        """Run the tester suites."""
        print("\n🧪 Starting tester suites")
        print("=" * 40)
        try:
            from run_tests import LagCalTestRunner
            runner = LagCalTestRunner(str(self.base_dir))
            success = runner.run_suites()
        except ImportError as e:
            print(f"❌ Test module not found: {e}")
            return False
        self.run_status["tests"] = success
        return success

    def print_summary(self):
        """Print run summary."""
        ok = all(self.run_status.values())
        print("\n🎉 LAGCAL RUN COMPLETED" if ok else "\n⚠️ LAGCAL RUN FINISHED WITH ISSUES")
        print("=" * 50)
        for component, status in self.run_status.items():
            icon = "✅" if status else "❌"
            print(f"{icon} {component.replace('_', ' ').title()}")
        print(f"\n📁 Reports and CSV series in {self.output_dir}/")
        print("🔧 For troubleshooting, check the logs in logs/")


def main() -> int:
    """Main entry point for runner script."""
    parser = argparse.ArgumentParser(description="lagcal Project Runner")
    parser.add_argument("--scenario", help="Shipped scenario name or config path")
    parser.add_argument("--acceptance", action="store_true", help="Run the acceptance manifest")
    parser.add_argument("--test-only", action="store_true", help="Run only the tester suites")
    parser.add_argument("--list", action="store_true", help="List shipped scenarios")
    parser.add_argument("--output-dir", help="Directory for reports")
    parser.add_argument("--resolution", type=int, help="Override the mesh resolution")
    parser.add_argument("--tolerance", action="append", default=[], metavar="NAME=VALUE",
                        help="Override a named tolerance")
    parser.add_argument("--seed", type=int, help="Override the random seed")
    parser.add_argument("--parallelism", type=int, default=1, help="Concurrent scenarios")
    parser.add_argument("--verbose", action="store_true", help="Verbose console logging")
    args = parser.parse_args()

    runner = LagCalRunner()
    runner.print_banner()

    if args.list:
        runner.list_scenarios()
        return 0

    if not runner.check_prerequisites():
        print("❌ Prerequisites not met")
        return 1

    options: Dict = {
        "resolution": args.resolution,
        "tolerances": args.tolerance,
        "seed": args.seed,
        "verbose": args.verbose,
    }

    if args.test_only:
        return 0 if runner.run_tests() else 1

    if args.scenario:
        return runner.run_scenario(args.scenario, output_dir=args.output_dir, **options)

    code = runner.run_acceptance(parallelism=args.parallelism, output_dir=args.output_dir, **options)
    if not args.acceptance:
        if not runner.run_tests():
            code = code or 1
        runner.print_summary()
    return code


if __name__ == "__main__":
    sys.exit(main())
