"""Exception types shared across the workbench."""


class NetlistError(Exception):
    """Base class for structural netlist problems."""


class ParseError(NetlistError):
    """Malformed netlist text.  Carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SemanticError(NetlistError):
    """Structurally well-formed input that violates an IR invariant
    (duplicate driver, undriven net, unknown instance tag, bad arity)."""


class CycleError(NetlistError):
    """Combinational loop.  ``cycle`` holds the net ids of one loop."""

    def __init__(self, cycle):
        super().__init__(f"combinational cycle through nets {list(cycle)}")
        self.cycle = tuple(cycle)


class PortMismatch(NetlistError):
    """Hierarchical port map names a missing port or widths disagree."""


class UnknownModule(NetlistError):
    """Instance references something that is not a module."""


class BadParams(ValueError):
    """Generator or analysis parameters outside the supported range."""


class BadThreshold(ValueError):
    """Rarity threshold outside (0, 0.5)."""


class UnitMismatch(ValueError):
    """Budget terms were measured under different stream settings."""


class NoRareNets(RuntimeError):
    """Trigger construction found no usable rare net candidates."""


class NoWitness(RuntimeError):
    """No input assignment provably fires the trigger; insertion aborted."""


class WouldViolateTiming(RuntimeError):
    """Inserted logic would push a path past the clock constraint."""


class SignatureMismatch(ValueError):
    """Candidate netlists disagree on primary I/O words."""


class UnknownInstance(KeyError):
    """Named instance tag does not exist in the netlist."""


class EmptySet(ValueError):
    """An operation was handed an empty candidate set."""


class LabelMismatch(ValueError):
    """Ground-truth labels do not cover the report under scoring."""


class BudgetInfeasible(RuntimeError):
    """No architecture assignment satisfies the error/power budget."""
