import sys
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Dict, Optional
from pydantic import field_validator
import json


DEFAULT_POLYNOMIALS: Dict[int, int] = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11B,
    16: 0x1100B,
}


class Settings(BaseSettings):
    APP_NAME: str = "maskcheck"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False

    PATTERN_DB_URL: str = "sqlite:///:memory:"

    # Run defaults
    WIDTH: int = 8
    ORDER: int = 1
    WORKERS: int = 1
    MODE: str = "full"
    REPORT_FORMAT: str = "text"

    # Budgets
    BIT_BUDGET: int = 32
    UNROLL_LIMIT: int = 4096
    SMT_CAP_BITS: int = 12
    TILE_BITS: int = 12
    DENSE_HISTOGRAM_BITS: int = 20

    SMT_DIR: Optional[str] = None
    SOLVER_CMD: Optional[str] = None

    LOG_LEVEL: str = "INFO"
    LOG_CONFIG: str = "logging.ini"

    IRREDUCIBLE_POLYNOMIALS: Dict[int, int] = dict(DEFAULT_POLYNOMIALS)

    # Dynamic .env selection
    model_config = SettingsConfigDict(
        env_prefix="MASKCHECK_",
        env_file=".env.test" if "pytest" in sys.modules else ".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="allow",
    )

    @field_validator("IRREDUCIBLE_POLYNOMIALS", mode="before", check_fields=False)
    def parse_polynomials(cls, v):
        if isinstance(v, str):
            v = v.strip()
            if v.startswith("{") and v.endswith("}"):
                try:
                    v = json.loads(v)
                except json.JSONDecodeError:
                    pass
            else:
                pairs = [i.split(":", 1) for i in v.split(",") if i.strip()]
                v = {w.strip(): p.strip() for w, p in pairs}
        if not v:
            return dict(DEFAULT_POLYNOMIALS)
        return {
            int(w): int(p, 0) if isinstance(p, str) else int(p)
            for w, p in dict(v).items()
        }

    @field_validator("DEBUG", mode="before", check_fields=False)
    def parse_debug(cls, v):
        if isinstance(v, bool):
            return v
        if isinstance(v, str):
            return v.lower() in ("true", "1", "yes", "y")
        return bool(v)

    @field_validator("MODE", mode="before", check_fields=False)
    def parse_mode(cls, v):
        mode = str(v).strip().lower()
        if mode not in ("full", "types"):
            raise ValueError("MODE must be 'full' or 'types'")
        return mode


settings = Settings()
