"""Exception hierarchy shared by every escalada module.

All library errors derive from :class:`EscaladaError` so callers (and the
CLI) can distinguish input/validation problems from genuine bugs.
"""

from __future__ import annotations


class EscaladaError(Exception):
    """Base class for all errors raised by this package."""


# --- probability / uncertainty inputs ---------------------------------------

class NonDistribution(EscaladaError):
    """A probability vector has negative entries or does not sum to 1."""


class EmptySamples(EscaladaError):
    """A Monte Carlo sample set contains zero stochastic passes."""


class EmptyInput(EscaladaError):
    """An operation requiring at least one sample received none."""


# --- threshold optimization --------------------------------------------------

class BadDelta(EscaladaError):
    """Escalation cost outside the open interval (0, 1)."""


class BadLabel(EscaladaError):
    """A class label index falls outside 0..K-1."""


class MisalignedData(EscaladaError):
    """Uncertainty statistics and loss targets do not line up by sample."""


class MissingStd(EscaladaError):
    """A dropout-mode operation needs per-class standard deviations."""


# --- classifier backends -----------------------------------------------------

class EmptyClass(EscaladaError):
    """Training corpus is missing examples for one or more classes."""


class BadConfig(EscaladaError):
    """A configuration value violates its documented bounds."""


class ParseError(EscaladaError):
    """A data file could not be parsed; message names the offending spot."""


class InvariantViolation(EscaladaError):
    """A parsed record violates a domain invariant; message names the sample."""


# --- language model / completion ----------------------------------------------

class EmptyCorpus(EscaladaError):
    """An n-gram scorer cannot be trained on an empty corpus."""


class UnknownMaskEntry(EscaladaError):
    """A file-backed scorer has no stored entry for the queried mask."""


class BadPattern(EscaladaError):
    """An ignore rule is not a valid regular expression."""


class EmptySentence(EscaladaError):
    """Perplexity of an empty token sequence is undefined."""


class ClockSkew(EscaladaError):
    """A monitor event timestamp regressed beyond tolerance."""


# --- experiment harness --------------------------------------------------------

class NotEnoughWords(EscaladaError):
    """Text has too few corruptible words for the requested misspelling count."""


class TooFewSamples(EscaladaError):
    """A class has too few examples to populate every fold."""


class UsageError(EscaladaError):
    """Malformed command-line invocation."""
