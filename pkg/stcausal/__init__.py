"""
stcausal
Spatiotemporal causal pathway discovery for air-quality sensor networks
"""

__version__ = "0.1.0"
