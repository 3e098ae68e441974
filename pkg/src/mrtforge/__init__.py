"""Mean radiant temperature from six-directional radiation physics, fisheye
sky features and a physics-informed neural network."""
from .metrics import MetricsReport, compute_metrics, shade_accuracy
from .radiation import BodyRadiationProfile, DirectionalFluxes, tmrt_from_fluxes
from .solar import GeoTime, SolarPosition, solar_position

__version__ = "0.1.0"
