"""The RIC loop up close: bus topics, KPM reports, control commands.

The RO xApp never touches the channel. It publishes a command on
``ris-ctl``, the node applies it, the CM xApp publishes one KPM report per
UE on ``kpm`` stamped with the configuration epoch, and the RO xApp only
accepts reports carrying the epoch it asked for.
"""

# %%
from risric import CASES, KPM_TOPIC, BusMessage, encode_message, ro_xapp_run

sc = CASES["case3"]()
node = sc.build_node(trial=0)

# %% full optimization through the emulated RIC, every message via a local socket
res = ro_xapp_run(node, sc.policy, sc.optimizer_settings(element_order_seed=0),
                  transport="socket")
print(f"simulated elapsed: {res.elapsed_ms} ms")
print(f"commands sent: {res.commands_sent} "
      f"(1 initial + {len(res.trace)} candidates + {res.trace.n_reverted} reversions)")
print(f"KPM reports consumed: {len(res.reports_consumed)}, "
      f"epoch violations: {res.epoch_violations}")

# %% what a report looks like on the wire
first = res.reports_consumed[0]
print(encode_message(BusMessage(KPM_TOPIC, first, 1)), end="")

# %% per-epoch view of the first few evaluations
for rep in res.reports_consumed[:8]:
    print(f"  t={rep.sim_time_ms:4d} ms  epoch {rep.config_epoch:3d}  UE{rep.ue_id}  "
          f"{rep.ss_rsrp_dbm:8.2f} dBm  CQI {rep.cqi:2d}")
