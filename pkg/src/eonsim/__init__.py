"""eonsim: dynamic RMSA simulation for elastic optical networks over C and C+L bands."""

from .config import ScenarioConfig, load_config, to_toml_text
from .engine import (CandidateEvaluation, Policy, ScenarioRow, SimReport,
                     build_runtime, evaluate_candidates, run_scenario,
                     select_best, write_plot_data, write_report_csv)
from .errors import (ConfigError, EonsimError, NoPathError, QotError,
                     SpectrumError, TopologyError)
from .pathing import (CandidatePath, CatalogMode, PathCatalog, build_catalog,
                      dump_catalog, k_disjoint_shortest_paths, k_shortest_paths)
from .qot import (Band, BandPlan, GsnrModel, ModulationFormat, PathGsnrCache,
                  build_mrd_table, compute_mrd, db_to_linear, default_band_plan,
                  linear_to_db, path_gsnr, select_mfl, span_ase_power,
                  span_nli_power, uniform_chain_gsnr_db, worst_case_frequency)
from .spectrum import (Allocation, SpectrumGrid, allocate, candidate_max_f,
                       first_fit, max_frequency, release, required_slots)
from .topology import (BandFiberParams, ConnectionPdf, Link, Node, Span,
                       Topology, build_topology, connection_pdf, load_topology,
                       partition_spans)
from .traffic import (Request, WorkloadSpec, dump_workload_csv,
                      generate_workload, load_workload_csv, sample_connection,
                      sample_throughput)

__version__ = "0.1.0"
