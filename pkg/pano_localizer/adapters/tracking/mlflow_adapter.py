"""
MLflow Adapter - Pano Localizer
Tracking opcional de ejecuciones de evaluación en MLflow
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import mlflow

from ...domain.ports import ExperimentTracker

logger = logging.getLogger(__name__)

MAX_PARAM_LENGTH = 500


def flatten_params(params: Dict[str, Any], prefix: str = "") -> Dict[str, str]:
    """Aplana dicts anidados a claves con punto; valores como str truncado"""
    flat: Dict[str, str] = {}
    for key, value in params.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten_params(value, f"{name}."))
        else:
            flat[name] = str(value)[:MAX_PARAM_LENGTH]
    return flat


class MLflowTracker(ExperimentTracker):
    """Adapter para MLflow - registra parámetros, métricas y artefactos del reporte"""

    def __init__(
        self,
        tracking_uri: str = "sqlite:///data/mlflow.db",
        experiment_name: str = "pano_localizer_evaluation",
    ):
        self.tracking_uri = tracking_uri
        self.experiment_name = experiment_name
        self._setup_mlflow()

    def _setup_mlflow(self) -> None:
        """Configura MLflow tracking"""
        if self.tracking_uri.startswith("sqlite:///"):
            Path(self.tracking_uri[len("sqlite:///") :]).parent.mkdir(parents=True, exist_ok=True)
        mlflow.set_tracking_uri(self.tracking_uri)
        mlflow.set_experiment(self.experiment_name)
        logger.info(f"MLflow configurado - URI: {self.tracking_uri}, Experiment: {self.experiment_name}")

    def log_run(
        self,
        run_name: str,
        params: Dict[str, Any],
        metrics: Dict[str, float],
        artifacts: Optional[List[Path]] = None,
    ) -> Optional[str]:
        numeric = {k: float(v) for k, v in metrics.items() if isinstance(v, (int, float)) and v is not None}
        try:
            with mlflow.start_run(run_name=run_name) as run:
                mlflow.log_params(flatten_params(params))
                mlflow.log_metrics(numeric)
                for path in artifacts or []:
                    mlflow.log_artifact(str(path))
                logger.info(f"✅ Run {run_name} registrado en MLflow: {run.info.run_id}")
                return run.info.run_id
        except Exception as e:
            logger.error(f"❌ Error registrando run en MLflow: {e}")
            raise
