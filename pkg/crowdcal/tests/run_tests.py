#!/usr/bin/env python3
"""
Test runner script for running all tests.

Run with: python -m crowdcal.tests.run_tests
(pytest is the usual runner; ``pytest -m "not slow"`` skips the long statistical checks)
"""

import os
import sys
import unittest
import argparse

# Add the parent directory to the path so we can import crowdcal
parent_dir = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if parent_dir not in sys.path:
    sys.path.insert(0, parent_dir)

TEST_GROUPS = {
    'ad': [
        'test_imports.py',
        'test_dual.py',
        'test_tracing.py',
    ],
    'estimators': [
        'test_kde.py',
        'test_estimators.py',
    ],
    'model': [
        'test_social_force.py',
        'test_histogram.py',
        'test_scenarios.py',
    ],
    'optimizers': [
        'test_optimizers.py',
    ],
    'harness': [
        'test_harness.py',
        'test_config.py',
        'test_cli.py',
    ],
}


def run_tests(test_type=None):
    """
    Run the tests.

    Args:
        test_type: Group from TEST_GROUPS, or None for all

    Returns:
        True if every test passed
    """
    loader = unittest.TestLoader()

    if test_type is None:
        print("Running all tests...")
        test_files = [name for group in TEST_GROUPS.values() for name in group]
    else:
        print(f"Running {test_type} tests...")
        test_files = TEST_GROUPS[test_type]

    tests = unittest.TestSuite()
    test_dir = os.path.dirname(os.path.abspath(__file__))

    for test_file in test_files:
        test_file_path = os.path.join(test_dir, test_file)
        if os.path.exists(test_file_path):
            tests.addTest(loader.discover(test_dir, pattern=test_file, top_level_dir=parent_dir))
        else:
            print(f"Warning: Test file {test_file} not found")

    runner = unittest.TextTestRunner(verbosity=2)
    return runner.run(tests).wasSuccessful()


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description='Run crowd calibration toolkit tests')
    parser.add_argument('--type', choices=sorted(TEST_GROUPS) + ['all'],
                        default='all', help='Type of tests to run')

    args = parser.parse_args()
    test_type = None if args.type == 'all' else args.type
    sys.exit(0 if run_tests(test_type) else 1)
