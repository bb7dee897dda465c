"""
Command-line application: configuration, run manifests and subcommands
"""
__version__ = '0.1.0'

__all__ = ['__version__']
