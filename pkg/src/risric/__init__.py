"""Simulated RIS-assisted 5G downlink controlled by near-RT RIC xApps."""

from .channel import (ChannelRealization, ConfigurationError, DimensionError,
                      MeasurementConfig, RisConfiguration, draw_channel, effective_channel,
                      measure_power_dbfs, measure_ss_rsrp)
from .harness import (CASES, CampaignResult, ScenarioConfig, calibrate, emit_csv,
                      emit_summary, load_scenario, oracle_check, run_campaign)
from .optimizer import (OptimizationTrace, OptimizerSettings, exhaustive_optimize,
                        greedy_optimize, random_baseline)
from .policy import (UeServiceState, WeightPolicy, compute_weights, cqi_from_rsrp,
                     tbs_proxy, update_throughput_ewma, weighted_rsrp)
from .ric import (CONTROL_TOPIC, KPM_TOPIC, BusMessage, DirectEvaluator, KpmReport,
                  MessageBus, RanNode, RisControlCommand, ServiceModel, decode_message,
                  encode_message, ro_xapp_run)

__version__ = "0.1.0"
