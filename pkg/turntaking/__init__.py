"""
VR Turn-Taking Analytics

An offline pipeline that labels turn-transition behaviours in multi-user VR
session recordings, extracts nonverbal and speech features, and trains,
evaluates and interprets turn-taking classifiers.
"""

__version__ = "1.0.0"
__author__ = "VR Turn-Taking Analytics Team"
