"""Configuration settings for the TV-ULoG pipeline."""
from pydantic import Field
from pydantic_settings import BaseSettings


class ScaleSpaceConfig(BaseSettings):
    """Discrete Gaussian scale-space configuration."""
    model_config = {"env_file": ".env", "case_sensitive": False, "extra": "ignore"}

    # Kernel radius is ceil(kernel_truncate * sqrt(t))
    kernel_truncate: float = Field(default=4.0, gt=0, validation_alias="KERNEL_TRUNCATE")
    power_iteration_tol: float = Field(default=1e-4, gt=0, validation_alias="POWER_ITERATION_TOL")
    power_iteration_max: int = Field(default=500, ge=1, validation_alias="POWER_ITERATION_MAX")
    power_iteration_seed: int = Field(default=20240917, validation_alias="POWER_ITERATION_SEED")


class BayesConfig(BaseSettings):
    """Linear-Gaussian model defaults."""
    model_config = {"env_file": ".env", "case_sensitive": False, "extra": "ignore"}

    gamma: float = Field(default=0.03, gt=0, validation_alias="NOISE_STD")
    tau: float = Field(default=1.0, gt=0, validation_alias="PRIOR_TAU")
    eps: float = Field(default=1e-2, gt=0, validation_alias="PRIOR_EPS")
    # Number of samples drawn per batch when sampling the posterior
    sample_chunk: int = Field(default=256, ge=1, validation_alias="SAMPLE_CHUNK")


class TubeConfig(BaseSettings):
    """Credible tube estimation configuration."""
    model_config = {"env_file": ".env", "case_sensitive": False, "extra": "ignore"}

    alpha: float = Field(default=0.05, gt=0, lt=1, validation_alias="TUBE_ALPHA")
    max_bisect: int = Field(default=20, ge=0, validation_alias="TUBE_MAX_BISECT")
    # Cubes evaluated per batch while streaming over samples
    cube_chunk: int = Field(default=256, ge=1, validation_alias="TUBE_CUBE_CHUNK")
    # Sample cubes are kept in memory when they fit, streamed otherwise
    resident_limit_mb: float = Field(default=256.0, ge=0, validation_alias="TUBE_RESIDENT_LIMIT_MB")


class SolverConfig(BaseSettings):
    """Optimization backend defaults."""
    model_config = {"env_file": ".env", "case_sensitive": False, "extra": "ignore"}

    default_solver: str = Field(default="socp", validation_alias="TVULOG_SOLVER")
    first_order_max_iters: int = Field(default=200_000, ge=1, validation_alias="FIRST_ORDER_MAX_ITERS")
    first_order_tol: float = Field(default=1e-6, gt=0, validation_alias="FIRST_ORDER_TOL")
    stall_window: int = Field(default=100, ge=1, validation_alias="STALL_WINDOW")
    socp_max_iters: int = Field(default=100, ge=1, validation_alias="SOCP_MAX_ITERS")
    socp_tol: float = Field(default=1e-8, gt=0, validation_alias="SOCP_TOL")
    socp_feastol: float = Field(default=1e-9, gt=0, validation_alias="SOCP_FEASTOL")
    # mu = mu_scale * RMS tube width
    mu_scale: float = Field(default=1e-3, gt=0, validation_alias="MU_SCALE")
    trace_every: int = Field(default=10, ge=1, validation_alias="TRACE_EVERY")


class ExtractionConfig(BaseSettings):
    """Blob region extraction configuration."""
    model_config = {"env_file": ".env", "case_sensitive": False, "extra": "ignore"}

    r: float = Field(default=0.5, gt=0, lt=1, validation_alias="EXTRACTION_R")
    dark: bool = Field(default=False, validation_alias="DARK_BLOBS")


class MonitoringConfig(BaseSettings):
    """Monitoring and observability configuration."""
    model_config = {"env_file": ".env", "case_sensitive": False, "extra": "ignore"}

    log_level: str = Field(default="INFO", validation_alias="LOG_LEVEL")
    enable_metrics: bool = Field(default=True, validation_alias="ENABLE_METRICS")
    log_dir: str = Field(default="logs", validation_alias="LOG_DIR")


class TvUlogConfig(BaseSettings):
    """Main configuration for the TV-ULoG pipeline."""
    model_config = {"env_file": ".env", "case_sensitive": False, "extra": "ignore"}

    environment: str = Field(default="development", validation_alias="ENVIRONMENT")
    debug: bool = Field(default=False, validation_alias="DEBUG_MODE")

    # Upper bound on worker threads used for batched scale-space evaluation
    threads: int = Field(default=1, ge=1, validation_alias="TVULOG_THREADS")

    # Sub-configurations
    scalespace: ScaleSpaceConfig = Field(default_factory=ScaleSpaceConfig)
    bayes: BayesConfig = Field(default_factory=BayesConfig)
    tube: TubeConfig = Field(default_factory=TubeConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    extraction: ExtractionConfig = Field(default_factory=ExtractionConfig)
    monitoring: MonitoringConfig = Field(default_factory=MonitoringConfig)


def get_config() -> TvUlogConfig:
    """Get a freshly loaded configuration instance."""
    return TvUlogConfig()


# Global configuration instance
config = get_config()
