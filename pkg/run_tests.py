#!/usr/bin/env python3
"""
Comprehensive test runner for lagcal.
Runs the tester suites plus timing checks on shipped scenarios and writes a JSON report.
"""

import sys
import time
import json
from pathlib import Path
from datetime import datetime
import argparse

# Add current directory to path
sys.path.append(str(Path(__file__).parent))

from lagcal.cli import ScenarioConfig, run_scenario
from lagcal.utils.logging_config import get_logger
from lagcal.utils.testing import configure_test_logging
from test_functionals import FunctionalsTester
from test_geometry import GeometryTester
from test_isotopy import IsotopyTester
from test_lagcal import LagCalTester
from test_slag import SlagTester

SUITES = {
    "geometry": GeometryTester,
    "isotopy": IsotopyTester,
    "functionals": FunctionalsTester,
    "slag": SlagTester,
    "lagcal": LagCalTester,
}

# Wall-clock limits for shipped scenarios, in seconds
PERFORMANCE_THRESHOLDS = {
    "cc_exact": 5.0,
    "calabi_chain": 30.0,
}
MEMORY_THRESHOLD_MB = 2000


class LagCalTestRunner:
    """Comprehensive test runner for lagcal."""

    def __init__(self, base_dir: str = None):
        """Initialize test runner."""
        self.base_dir = Path(base_dir) if base_dir else Path(__file__).parent
        self.scenario_dir = self.base_dir / "lagcal" / "data" / "scenarios"
        self._performance_results = {}
        self.results = {
            "timestamp": None,
            "suites": {},
            "performance_tests": {},
            "overall_status": "unknown",
        }

    def run_suites(self, names=None) -> bool:
        """Run the tester suites; returns True iff every one passes."""
        success = True
        for name in names or SUITES:
            print(f"🔍 Running {name} suite...")
            print("-" * 40)
            tester = SUITES[name]()
            passed = tester.run_all_tests()
            self.results["suites"][name] = {
                "success": passed,
                "details": tester.test_results,
                "durations": tester.durations,
            }
            success &= passed
            print()
        return success

    def run_all_tests(self, verbose: bool = False, suites=None) -> bool:
        """Run all suites and performance checks and generate a report."""
        configure_test_logging(__name__, verbose)
        print("🧪 LAGCAL COMPREHENSIVE TEST SUITE")
        print("=" * 60)
        print(f"Started: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        print()

        start_time = time.time()

        suites_success = self.run_suites(suites)

        print("⚡ Running Performance Tests...")
        print("-" * 40)
        perf_success = self._run_performance_tests()
        self.results["performance_tests"] = {
            "success": perf_success,
            "details": self._performance_results,
            "operations": get_logger().get_performance_summary(),
        }
        print()

        self.results["timestamp"] = datetime.now().isoformat()
        self.results["duration"] = time.time() - start_time

        all_success = suites_success and perf_success
        self.results["overall_status"] = "PASS" if all_success else "FAIL"

        self._generate_report()
        return all_success

    def _run_performance_tests(self) -> bool:
        """Time shipped scenarios against their thresholds and check memory."""
        self._performance_results = {}

        try:
            for name, threshold in PERFORMANCE_THRESHOLDS.items():
                print(f"  Timing scenario {name}...")
                config = ScenarioConfig.from_file(self.scenario_dir / f"{name}.json")
                report = run_scenario(config, write=False)
                seconds = report.timing["seconds"]
                self._performance_results[name] = {
                    "success": report.all_passed and seconds <= threshold,
                    "duration": seconds,
                    "threshold": threshold,
                }
                if not report.all_passed:
                    print(f"    ❌ {name} failed its checks: {report.error or report.verdicts}")
                elif seconds > threshold:
                    print(f"    ⚠️ {name} took {seconds:.2f}s (threshold: {threshold:.1f}s)")
                else:
                    print(f"    ✅ {name}: {seconds:.2f}s")

            print("  Testing memory usage...")
            try:
                import psutil
                memory_mb = psutil.Process().memory_info().rss / (1024 * 1024)
                self._performance_results["memory_usage"] = {
                    "success": memory_mb < MEMORY_THRESHOLD_MB,
                    "memory_mb": memory_mb,
                    "threshold": MEMORY_THRESHOLD_MB,
                }
                if memory_mb > MEMORY_THRESHOLD_MB:
                    print(f"    ⚠️ High memory usage: {memory_mb:.1f}MB (threshold: {MEMORY_THRESHOLD_MB}MB)")
                else:
                    print(f"    ✅ Memory usage: {memory_mb:.1f}MB")
            except ImportError:
                print("    ⚠️ psutil not available for memory testing")

            return all(test.get("success", False) for test in self._performance_results.values())

        except Exception as e:
            print(f"    ❌ Performance test error: {e}")
            return False

    def _generate_report(self):
        """Print the summary and save the JSON report."""
        print("📊 GENERATING COMPREHENSIVE REPORT")
        print("=" * 60)

        status_emoji = "🎉" if self.results["overall_status"] == "PASS" else "❌"
        print(f"Overall Status: {status_emoji} {self.results['overall_status']}")
        print(f"Duration: {self.results['duration']:.2f} seconds")
        print()

        print("🔍 TESTER SUITES:")
        for name, suite in self.results["suites"].items():
            passed = sum(suite["details"].values())
            total = len(suite["details"])
            print(f"  {'✅' if suite['success'] else '❌'} {name}: {passed}/{total}")
        print()

        performance = self.results["performance_tests"]
        print("⚡ PERFORMANCE TESTS:")
        print(f"  Status: {'✅ PASS' if performance['success'] else '❌ FAIL'}")
        for test_name, test_data in performance["details"].items():
            status = "✅" if test_data["success"] else "❌"
            if "duration" in test_data:
                print(f"    {test_name}: {status} {test_data['duration']:.2f}s")
            elif "memory_mb" in test_data:
                print(f"    {test_name}: {status} {test_data['memory_mb']:.1f}MB")
        print()

        self._save_detailed_report()

    def _save_detailed_report(self):
        """Save detailed report to file."""
        try:
            report_file = self.base_dir / "lagcal_test_report.json"
            report_data = {
                "test_run": {
                    "timestamp": self.results["timestamp"],
                    "duration": self.results["duration"],
                    "overall_status": self.results["overall_status"],
                },
                "suites": self.results["suites"],
                "performance_tests": self.results["performance_tests"],
            }
            with open(report_file, "w") as f:
                json.dump(report_data, f, indent=2, default=str)
            print(f"📄 Detailed report saved to: {report_file}")
        except Exception as e:
            print(f"⚠️ Failed to save detailed report: {e}")


def main():
    """Main entry point for test runner."""
    parser = argparse.ArgumentParser(description="lagcal Comprehensive Test Runner")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose output")
    parser.add_argument("--suite", action="append", choices=sorted(SUITES),
                        help="Run only the named tester suite (repeatable)")
    parser.add_argument("--performance-only", action="store_true", help="Run only performance tests")
    args = parser.parse_args()

    runner = LagCalTestRunner()
    if args.performance_only:
        configure_test_logging(__name__, args.verbose)
        return runner._run_performance_tests()
    if args.suite:
        configure_test_logging(__name__, args.verbose)
        return runner.run_suites(args.suite)
    return runner.run_all_tests(verbose=args.verbose)


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
