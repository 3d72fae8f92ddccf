"""Simulation toolkit for non-signaling assisted broadcast over finite fields.

Submodules: :mod:`field`, :mod:`topology`, :mod:`minrank`, :mod:`channel`,
:mod:`nsbox`, :mod:`schemes`, :mod:`infotools`, :mod:`harness`, :mod:`cli`.
"""
__version__ = "0.1.0"
