"""Exception hierarchy.

Each error carries the process exit code the command-line front end maps it to:
1 config error, 2 domain error, 3 certificate failure, 4 numerical failure.
"""


class PairedWalkError(Exception):
    exit_code = 4


class ConfigError(PairedWalkError):
    exit_code = 1


class DomainError(PairedWalkError):
    exit_code = 2


class HorizonDomain(DomainError):
    pass


class DomainExit(DomainError):
    pass


class CertificateFailure(PairedWalkError):
    exit_code = 3


class NonHermitianInput(CertificateFailure):
    pass


class SpectrumOutOfRange(CertificateFailure):
    pass


class ConstraintUnsatisfiable(CertificateFailure):
    pass


class SkewnessViolation(CertificateFailure):
    pass


class InvalidCase(CertificateFailure):
    pass


class NumericalFailure(PairedWalkError):
    exit_code = 4


class NonSmoothField(NumericalFailure):
    pass


class UnboundedMetric(NumericalFailure):
    pass


class SynthesisFailure(NumericalFailure):
    def __init__(self, message, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class OddLattice(ConfigError):
    pass


class PacketTruncated(ConfigError):
    pass


class CFLViolation(NumericalFailure):
    pass


class GridMismatch(ConfigError):
    pass
