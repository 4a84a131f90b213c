# src/measured_ising/core/exceptions.py
class MeasuredIsingError(Exception):
    """Base class for measured-ising exceptions."""
    pass

class ConfigurationError(MeasuredIsingError):
    """Exception for configuration errors."""
    pass

class LatticeError(MeasuredIsingError):
    """Unsupported lattice kind or extents."""
    pass

class DisconnectedPathError(LatticeError):
    """Raised when two sites have no connecting path."""
    def __init__(self, site_a, site_b, message=None):
        self.site_a = site_a
        self.site_b = site_b
        self.message = message or f"Sites {site_a} and {site_b} are not connected."
        super().__init__(self.message)

class ParameterError(MeasuredIsingError):
    """Invalid circuit parameters or observable names."""
    pass

class ContractionError(MeasuredIsingError):
    """Exception for tensor-network contraction failures."""
    pass

class ZeroWeightError(ContractionError):
    """The contracted weight vanished: the outcome configuration is impossible."""
    pass

class DegenerateEnvironmentError(ContractionError):
    """A bond environment has no positive weight for the current outcome."""
    pass

class UnsupportedGeometryError(ContractionError):
    """The lattice has no row structure the boundary-MPS engine can contract."""
    pass

class SamplingError(MeasuredIsingError):
    """Exception for Markov-chain errors."""
    pass

class ChainFailedError(SamplingError):
    """A single Markov chain failed; carries the chain index."""
    def __init__(self, chain_index, reason):
        self.chain_index = chain_index
        self.reason = reason
        self.message = f"Chain {chain_index} failed: {reason}"
        super().__init__(self.message)

    def __reduce__(self):
        return (self.__class__, (self.chain_index, self.reason))

class OracleSizeError(MeasuredIsingError):
    """The lattice is too large for exhaustive enumeration."""
    pass

class VerificationError(MeasuredIsingError):
    """An identity check failed; carries the full report."""
    def __init__(self, report, message=None):
        self.report = report
        failed = [check.name for check in report.checks if not check.passed]
        self.message = message or f"Verification failed: {', '.join(failed)}"
        super().__init__(self.message)

class AnalysisError(MeasuredIsingError):
    """Exception for statistics and fitting errors."""
    pass

class InsufficientDataError(AnalysisError):
    """Not enough chains, sizes or points for the requested estimate."""
    pass

class ArtifactError(MeasuredIsingError):
    """Exception for artifact read/write errors."""
    pass
