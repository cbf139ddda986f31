from __future__ import annotations

from Common import FloatColumn, IntColumn, Row

__all__ = ("EpochRow",)


class EpochRow(Row):
    columns = {
        "epoch": IntColumn(),
        "recon_loss": FloatColumn(),
        "dyn_loss": FloatColumn(),
        "var_kl_enc": FloatColumn(),
        "var_kl_fwd": FloatColumn(),
        "total": FloatColumn(),
    }

    epoch: int
    recon_loss: float
    dyn_loss: float
    var_kl_enc: float
    var_kl_fwd: float
    total: float
