"""
Command-line entry point for the TA synchronization simulator.
"""
