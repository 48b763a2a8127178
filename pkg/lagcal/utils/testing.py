"""
Shared tester machinery for the top-level test suites.
"""

import logging
import sys
import time
import traceback
from pathlib import Path
from typing import Callable, Dict, List, Tuple

TEST_LOG = "lagcal_test.log"


def configure_test_logging(name: str, verbose: bool = False) -> logging.Logger:
    """Root logging to lagcal_test.log plus the console, once per process."""
    root = logging.getLogger()
    if not any(isinstance(h, logging.FileHandler) and Path(h.baseFilename).name == TEST_LOG
               for h in root.handlers):
        logging.basicConfig(
            level=logging.INFO,
            format='%(asctime)s - %(levelname)s - %(message)s',
            handlers=[
                logging.FileHandler(TEST_LOG),
                logging.StreamHandler(sys.stdout),
            ],
        )
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    return logging.getLogger(name)


class SuiteTester:
    """Runs (name, method) pairs; methods return bool and log their own failure reason."""

    suite_name = "lagcal"

    def __init__(self, logger: logging.Logger):
        self.logger = logger
        self.test_results: Dict[str, bool] = {}
        self.durations: Dict[str, float] = {}

    def tests(self) -> List[Tuple[str, Callable[[], bool]]]:
        raise NotImplementedError

    def run_all_tests(self) -> bool:
        logger = self.logger
        logger.info(f"🚀 Starting {self.suite_name} tests")
        logger.info("=" * 60)

        start_time = time.time()
        tests = self.tests()
        passed = 0
        total = len(tests)

        for test_name, test_func in tests:
            logger.info(f"\n🔍 Running {test_name} test...")
            began = time.time()
            result = False
            try:
                result = bool(test_func())
                if result:
                    logger.info(f"✅ {test_name} test PASSED")
                    passed += 1
                else:
                    logger.error(f"❌ {test_name} test FAILED")
            except Exception as e:
                logger.error(f"❌ {test_name} test ERROR: {e}")
                logger.error(traceback.format_exc())
            self.test_results[test_name] = result
            self.durations[test_name] = time.time() - began

        duration = time.time() - start_time
        logger.info(f"\n📊 {self.suite_name} Test Summary")
        logger.info("=" * 40)
        logger.info(f"Tests passed: {passed}/{total}")
        logger.info(f"Success rate: {(passed / max(total, 1)) * 100:.1f}%")
        logger.info(f"Duration: {duration:.2f} seconds")

        if passed == total:
            logger.info(f"🎉 All {self.suite_name} tests passed!")
            return True
        logger.warning(f"⚠️ {total - passed} tests failed. Check lagcal_test.log for details.")
        return False

    def check(self, condition: bool, message: str) -> bool:
        """Log ``message`` at ERROR when ``condition`` is false; return the condition."""
        if not condition:
            self.logger.error(message)
        return bool(condition)

    def close(self, value: float, expected: float, tol: float, label: str) -> bool:
        ok = abs(value - expected) <= tol
        if ok:
            self.logger.info(f"  {label}: {value:.10g} (expected {expected:.10g})")
        else:
            self.logger.error(f"  {label}: {value:.10g}, expected {expected:.10g} within {tol:.1e}")
        return ok

    def raises(self, error: type, func: Callable, *args, **kwargs) -> bool:
        try:
            func(*args, **kwargs)
        except error as exc:
            self.logger.info(f"  raised {type(exc).__name__}: {exc}")
            return True
        except Exception as exc:
            self.logger.error(f"  expected {error.__name__}, got {type(exc).__name__}: {exc}")
            return False
        self.logger.error(f"  expected {error.__name__}, nothing raised")
        return False
