"""Self-contained numerical kernels used by every other module."""

from .linalg import PcaModel, pca_fit, qr_orthonormalize, thin_svd
from .smooth import gaussian_smooth_varbw, lowess, savitzky_golay
from .optimize import bounded_minimize, brent_root
from .mixture import Gmm, gmm_fit_em
from .cluster import silhouette, ward_cluster
from .neural import AdamState, Mlp, MseLoss, mlp_train

__all__ = [
    "AdamState",
    "Gmm",
    "Mlp",
    "MseLoss",
    "PcaModel",
    "bounded_minimize",
    "brent_root",
    "gaussian_smooth_varbw",
    "gmm_fit_em",
    "lowess",
    "mlp_train",
    "pca_fit",
    "qr_orthonormalize",
    "savitzky_golay",
    "silhouette",
    "thin_svd",
    "ward_cluster",
]
