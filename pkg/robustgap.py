#!/usr/bin/env python3
"""
robustgap - class-wise accuracy disparity of robust linear classifiers.

Solves for Bayes-optimal standard and adversarially robust linear classifiers
under Gaussian and stable mixtures, checks the closed forms against Monte
Carlo estimates, and sweeps adversarial training over imbalance and budget.
"""

import sys

from lib.cli import main


if __name__ == "__main__":
    sys.exit(main())
