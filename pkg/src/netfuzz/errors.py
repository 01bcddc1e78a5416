"""Exception hierarchy shared by all netfuzz modules."""


class NetfuzzError(Exception):
    """Base class; ``origin`` names the module that raised it (used by the CLI)."""

    origin = "netfuzz"


class NetlistError(NetfuzzError, ValueError):
    origin = "netlist"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(NetlistError):
    pass


class CombinationalCycleError(NetlistError):
    def __init__(self, member, line=None):
        self.member = member
        super().__init__(f"combinational cycle through {member!r}", line)


class UnknownNetError(NetlistError, KeyError):
    def __init__(self, net):
        self.net = net
        NetlistError.__init__(self, f"unknown net {net!r}")

    def __str__(self):
        return self.args[0]


class SelectionError(NetfuzzError, ValueError):
    origin = "target_selector"


class AtpgError(NetfuzzError, ValueError):
    origin = "atpg_engine"


class MergeError(NetfuzzError, ValueError):
    origin = "pattern_merge"


class SimulationError(NetfuzzError, ValueError):
    origin = "logic_sim"


class CampaignError(NetfuzzError, ValueError):
    origin = "fuzz_engine"


class SeedFormatError(NetfuzzError, ValueError):
    origin = "corpus"
