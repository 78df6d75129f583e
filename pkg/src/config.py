from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):

    model_config = SettingsConfigDict(
        env_prefix='QKINETIC_',
        env_file='.env',
        env_file_encoding='utf-8',
        extra='ignore'
    )

    # Desk-scale caps
    MAX_ROWS: int = Field(
        default=4096,
        description="Largest admissible matrix dimension d^n"
    )
    MAX_ENUMERATION: int = Field(
        default=6,
        description="Largest n for partition, composition and dissection enumeration"
    )
    MAX_SERIES_ORDER: int = Field(
        default=3,
        description="Largest truncation order of the solution and limit series"
    )
    MAX_COLLISION_ORDER: int = Field(
        default=2,
        description="Largest truncation order of the collision integral"
    )
    MAX_FUNCTIONAL_PARTICLES: int = Field(
        default=5,
        description="Largest s + N for marginal and correlation functionals"
    )

    # Tolerances
    HERMITIAN_TOL: float = Field(
        default=1e-10,
        description="Max-norm tolerance for Hermiticity and unitarity checks"
    )
    STATE_HERMITIAN_TOL: float = Field(
        default=1e-12,
        description="Max-norm tolerance for operators flagged as states"
    )
    POSITIVITY_FLOOR: float = Field(
        default=-1e-8,
        description="Smallest eigenvalue tolerated before a positivity warning"
    )

    # Numerics
    QUAD_NODES: int = Field(
        default=16,
        description="Gauss-Legendre nodes per nesting level of simplex integrals"
    )
    DUHAMEL_CHECK_NODES: int = Field(
        default=32,
        description="Gauss-Legendre nodes per level used by the Duhamel identity checks"
    )
    FD_STEP: float = Field(
        default=1e-4,
        description="Central-difference step of the kinetic-equation consistency oracle"
    )
    TAIL_FLOOR_FACTOR: float = Field(
        default=10.0,
        description="Sweep assertions apply only above this multiple of the tail floor"
    )
    DISSECTION_READING: str = Field(
        default="interval",
        description="Reading of dissections in generated evolution operators: 'interval' or 'set_partition'"
    )

    THREADS: Optional[int] = Field(
        default=None,
        description="Worker threads for sweep points; overrides --threads when set"
    )

    # Logging Configuration
    LOG_LEVEL: str = Field(
        default="INFO",
        description="Logging level (DEBUG, INFO, WARNING, ERROR)"
    )
    LOG_FILE: str = Field(
        default="",
        description="Optional log file path. If empty, logs only to stderr."
    )


settings = Settings()
