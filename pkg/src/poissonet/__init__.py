"""
poissonet - Network inference from count data under a multivariate Poisson model.

Copyright (c) 2025 orpheus497
Licensed under the MIT License - see LICENSE file for details.
"""

__version__ = "0.1.0"
__author__ = "orpheus497"
__license__ = "MIT"
__description__ = "Network inference from Poisson count data by conditional mutual information"
