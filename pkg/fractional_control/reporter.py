from typing import List
import csv

import numpy as np

from fractional_control.experiment import SweepRecord
from fractional_control.mild_solver import SolveReport

SWEEP_HEADER = ["beta", "terminal_error", "control_energy", "iterations", "converged", "lemma2_ok"]


def format_number(value: float) -> str:
    """17 significant digits, enough to reproduce the double exactly"""
    return f"{value:.17g}"


def _flag(value: bool) -> str:
    return "true" if value else "false"


class ReportGenerator:
    """Writes sweep and trajectory results as CSV"""

    def _ensure_extension(self, output_file: str) -> str:
        if not output_file.lower().endswith('.csv'):
            output_file = output_file + '.csv'
        return output_file

    def generate_sweep_report(self, records: List[SweepRecord], output_file: str) -> str:
        """One row per beta, in the order given"""
        output_file = self._ensure_extension(output_file)
        with open(output_file, 'w', newline='', encoding='utf-8') as csvfile:
            writer = csv.writer(csvfile, lineterminator='\n')
            writer.writerow(SWEEP_HEADER)
            for record in records:
                writer.writerow([
                    format_number(record.beta),
                    format_number(record.terminal_error),
                    format_number(record.control_energy),
                    record.iterations,
                    _flag(record.converged),
                    _flag(record.lemma2_ok),
                ])
        return output_file

    def generate_trajectory_report(self, report: SolveReport, output_file: str) -> str:
        """theta, the N state coefficients and ||u(theta)|| per grid node"""
        output_file = self._ensure_extension(output_file)
        traj = report.trajectory
        n_modes = traj.states.shape[1]
        control_norms = np.linalg.norm(report.controls, axis=1).tolist()
        with open(output_file, 'w', newline='', encoding='utf-8') as csvfile:
            writer = csv.writer(csvfile, lineterminator='\n')
            writer.writerow(["theta"] + [f"coef_{n}" for n in range(1, n_modes + 1)] + ["unorm"])
            for theta, state, unorm in zip(traj.grid.tolist(), traj.states.tolist(), control_norms):
                writer.writerow([format_number(theta)]
                                + [format_number(c) for c in state]
                                + [format_number(unorm)])
        return output_file
