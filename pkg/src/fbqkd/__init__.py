"""Simulator and post-processing toolkit for frequency-bin entanglement-based QKD.

Subpackages cover the full chain of a BBM92 frequency-bin link: two-qubit
state algebra (:mod:`fbqkd.qstate`), density-matrix tomography
(:mod:`fbqkd.tomography`), source and modulator models
(:mod:`fbqkd.photonics`), the fiber channel with thermal phase drift
(:mod:`fbqkd.channel`), Monte-Carlo generation of time-tagged detection
streams (:mod:`fbqkd.detection`), streaming coincidence extraction
(:mod:`fbqkd.coincidence`), key post-processing (:mod:`fbqkd.keyproc`),
the active phase-compensation loop (:mod:`fbqkd.phaselock`), and scenario
runners plus a command-line front end (:mod:`fbqkd.runner`,
:mod:`fbqkd.cli`).
"""

__version__ = "0.1.0"
