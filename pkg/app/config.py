"""Application configuration using Pydantic settings."""

from functools import lru_cache
from typing import List, Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.models.domain import GaConfig, GdConfig, QuadratureSpec


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        populate_by_name=True,
    )

    # API Settings
    api_title: str = "Skew-Normal Robust Inference API"
    api_version: str = "1.0.0"
    api_description: str = "Minimum density power divergence estimation and Wald-type tests for skew-normal data"
    debug: bool = False

    cors_origins: List[str] = Field(
        default=[
            "http://localhost:3000",
            "http://127.0.0.1:3000",
        ],
        description="Allowed CORS origins",
    )
    max_upload_mb: float = Field(
        default=20.0,
        alias="SNROBUST_API__MAX_UPLOAD_MB",
        description="Largest CSV upload accepted by the fit and test endpoints",
    )

    # Quadrature
    quad_abs_tol: float = Field(default=1e-10, gt=0, alias="SNROBUST_QUAD__ABS_TOL")
    quad_rel_tol: float = Field(default=1e-10, gt=0, alias="SNROBUST_QUAD__REL_TOL")
    quad_max_subdivisions: int = Field(default=200, ge=1, alias="SNROBUST_QUAD__MAX_SUBDIVISIONS")
    trunc_halfwidth: float = Field(
        default=15.0,
        ge=8.0,
        alias="SNROBUST_QUAD__TRUNC_HALFWIDTH",
        description="Half-width of the standardized integration window",
    )

    # Asymptotics
    cond_limit: float = Field(default=1e10, gt=1, alias="SNROBUST_ASYMPTOTICS__COND_LIMIT")
    singular_policy: Literal["raise", "marginal"] = Field(
        default="marginal",
        alias="SNROBUST_ASYMPTOTICS__SINGULAR_POLICY",
        description="Covariance fallback used by table commands when J is singular",
    )

    # Gradient descent
    gd_step_size: float = Field(default=0.04, gt=0, alias="SNROBUST_GD__STEP_SIZE")
    gd_max_iters: int = Field(default=10000, ge=1, alias="SNROBUST_GD__MAX_ITERS")
    gd_rel_obj_tol: float = Field(default=1e-10, gt=0, alias="SNROBUST_GD__REL_OBJ_TOL")
    gd_grad_tol: float = Field(default=1e-6, gt=0, alias="SNROBUST_GD__GRAD_TOL")
    gd_step_rule: Literal["fixed", "barzilai_borwein"] = Field(
        default="barzilai_borwein", alias="SNROBUST_GD__STEP_RULE"
    )

    # Genetic algorithm
    ga_population: int = Field(default=50, ge=2, alias="SNROBUST_GA__POPULATION")
    ga_elites: int = Field(default=2, ge=0, alias="SNROBUST_GA__ELITES")
    ga_crossover_prob: float = Field(default=0.8, ge=0, le=1, alias="SNROBUST_GA__CROSSOVER_PROB")
    ga_mutation_prob: float = Field(default=0.1, ge=0, le=1, alias="SNROBUST_GA__MUTATION_PROB")
    ga_max_generations: int = Field(default=5000, ge=1, alias="SNROBUST_GA__MAX_GENERATIONS")
    ga_stall_generations: int = Field(default=200, ge=1, alias="SNROBUST_GA__STALL_GENERATIONS")
    ga_selection: Literal["proportionate", "tournament"] = Field(
        default="proportionate", alias="SNROBUST_GA__SELECTION"
    )

    # Monte Carlo
    workers: int = Field(default=1, ge=1, alias="SNROBUST_MONTECARLO__WORKERS")

    # Output
    significant_digits: int = Field(default=12, ge=6, le=17, alias="SNROBUST_OUTPUT__SIGNIFICANT_DIGITS")
    alpha_grid: List[float] = Field(
        default=[0.0, 0.1, 0.3, 0.5, 0.7, 1.0],
        alias="SNROBUST_OUTPUT__ALPHA_GRID",
        description="Default DPD tuning parameters for fit and test commands",
    )

    # Logging
    log_level: str = Field(default="INFO", alias="SNROBUST_LOGGING__LEVEL")

    def quadrature_spec(self) -> QuadratureSpec:
        """Quadrature tolerances as a domain config."""
        return QuadratureSpec(
            abs_tol=self.quad_abs_tol,
            rel_tol=self.quad_rel_tol,
            max_subdivisions=self.quad_max_subdivisions,
        )

    def gd_config(self) -> GdConfig:
        """Gradient-descent defaults as a domain config."""
        return GdConfig(
            step_size=self.gd_step_size,
            max_iters=self.gd_max_iters,
            rel_obj_tol=self.gd_rel_obj_tol,
            grad_tol=self.gd_grad_tol,
            step_rule=self.gd_step_rule,
        )

    def ga_config(self, rng_seed: int = 0) -> GaConfig:
        """Genetic-algorithm defaults as a domain config."""
        return GaConfig(
            population=self.ga_population,
            elites=self.ga_elites,
            crossover_prob=self.ga_crossover_prob,
            mutation_prob=self.ga_mutation_prob,
            max_generations=self.ga_max_generations,
            stall_generations=self.ga_stall_generations,
            selection=self.ga_selection,
            rng_seed=rng_seed,
            polish=self.gd_config(),
        )


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
