"""
SQL aggregation of run artifacts with an in-memory DuckDB connection.

Loss traces, token frames and schedule dumps are registered as tables,
summarized with SQL and exported with ``write_csv``.
"""

import logging
import os
from typing import Dict, Optional

import duckdb
import pandas as pd

from pipeline_errors import InputDomainError

logger = logging.getLogger(__name__)

MOVING_AVERAGE_WINDOW = 50
REFERENCE_STEP = 100


class RunReporter:
    """Aggregates training and sampling artifacts."""

    def __init__(self, con: Optional[duckdb.DuckDBPyConnection] = None):
        self.con = con or duckdb.connect()
        logger.info("DuckDB connection initiated")

    def register_frame(self, name: str, frame: pd.DataFrame) -> duckdb.DuckDBPyRelation:
        """Copy a DataFrame into a table called ``name``."""
        view = f"{name}_frame"
        self.con.register(view, frame)
        self.con.execute(f"CREATE OR REPLACE TABLE {name} AS FROM {view}")
        self.con.unregister(view)
        return self.con.table(name)

    def loss_curve(self, trace: pd.DataFrame, window: int = MOVING_AVERAGE_WINDOW) -> duckdb.DuckDBPyRelation:
        """
        Loss trace with a trailing moving average.

        Args:
            trace: Frame with at least ``step`` and ``loss`` columns.
            window: Number of steps averaged, the current one included.

        Returns:
            Relation ``loss_curve(step, loss, moving_average)`` ordered by step.
        """
        if window < 1:
            raise InputDomainError(f"moving-average window must be >= 1, got {window}")
        if not {"step", "loss"} <= set(trace.columns):
            raise InputDomainError("loss trace needs 'step' and 'loss' columns")
        source = self.register_frame("loss_trace", trace[["step", "loss"]])
        query = f"""
          SELECT
            step,
            loss,
            AVG(loss) OVER (ORDER BY step ROWS BETWEEN {window - 1} PRECEDING AND CURRENT ROW) AS moving_average
          FROM {source.alias}
          ORDER BY step
        """
        logger.info(f"DuckDB - {window}-step moving average over {len(trace)} steps")
        self.con.execute(f"CREATE OR REPLACE TABLE loss_curve AS FROM ({query})")
        return self.con.table("loss_curve")

    def loss_improvement(
        self, trace: pd.DataFrame, reference_step: int = REFERENCE_STEP, window: int = MOVING_AVERAGE_WINDOW
    ) -> Dict[str, float]:
        """
        Relative drop of the moving average from ``reference_step`` to the last step.

        Returns:
            ``{"reference", "final", "improvement"}`` with
            ``improvement = 1 - final / reference``.
        """
        curve = self.loss_curve(trace, window)
        row = self.con.execute(
            f"""
            SELECT
              (SELECT moving_average FROM {curve.alias} WHERE step = {int(reference_step)}),
              (SELECT moving_average FROM {curve.alias} ORDER BY step DESC LIMIT 1)
            """
        ).fetchone()
        reference, final = row
        if reference is None:
            raise InputDomainError(f"loss trace has no step {reference_step}")
        improvement = 1.0 - final / reference if reference else float("nan")
        return {"reference": float(reference), "final": float(final), "improvement": float(improvement)}

    def code_usage(self, tokens: pd.DataFrame) -> duckdb.DuckDBPyRelation:
        """Histogram ``(kind, code_index, uses, share)`` of a ``token_frame``."""
        source = self.register_frame("tokens", tokens)
        query = f"""
          SELECT
            kind,
            code_index,
            COUNT(*) AS uses,
            COUNT(*) / SUM(COUNT(*)) OVER (PARTITION BY kind) AS share
          FROM {source.alias}
          GROUP BY kind, code_index
          ORDER BY kind, code_index
        """
        self.con.execute(f"CREATE OR REPLACE TABLE code_usage AS FROM ({query})")
        return self.con.table("code_usage")

    def schedule_summary(self, schedule: pd.DataFrame) -> duckdb.DuckDBPyRelation:
        """Per ``(t, family)`` mean and spread of the cumulative shares of a schedule dump."""
        source = self.register_frame("schedule", schedule)
        query = f"""
          SELECT
            t,
            split_part(element, ':', 1) AS family,
            COUNT(*) AS elements,
            AVG(alpha_bar) AS alpha_bar_mean,
            MIN(alpha_bar) AS alpha_bar_min,
            MAX(alpha_bar) AS alpha_bar_max,
            AVG(beta_bar) AS beta_bar_mean,
            AVG(gamma_bar) AS gamma_bar_mean
          FROM {source.alias}
          GROUP BY ALL
          ORDER BY t, family
        """
        self.con.execute(f"CREATE OR REPLACE TABLE schedule_summary AS FROM ({query})")
        return self.con.table("schedule_summary")

    def export(self, relation: duckdb.DuckDBPyRelation, path: str) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        try:
            relation.write_csv(path)
            logger.info(f"DuckDB - exported {relation.alias} to {path}")
        except Exception as e:
            logger.error(f"Error exporting {relation.alias}: {str(e)}")
            raise

    def close(self) -> None:
        self.con.close()
