"""Replay the bundled reference restoration scheme on the IEEE 39-bus fixture.

Prints the stage table and the strength trajectory at the HVDC bus, and
shows that the DC power follows the S_sc / 3 ceiling once the converter runs.

    python3 demos/replay_reference.py
"""

import json

from blackstart import RestorationScheme, data_path, derive_floors, load_grid, simulate, stage_table

model = load_grid(data_path("ieee39.json"))
with open(data_path("ieee39_reference_scheme.json")) as fh:
    scheme = RestorationScheme.from_dict(json.load(fh))

tl = simulate(model, scheme)
s_min, m_min = derive_floors(model)
print(f"start-up floors: S_sc >= {s_min:.1f} MVA, M_f >= {m_min:.1f} MW/Hz")
print(f"F = {tl.objective:.2f} MW, T = {tl.total_time:.0f} min, HVDC start at {tl.hvdc_start:.0f} min")

print("\nstage  source  start  connect  path")
for row in stage_table(model, tl):
    path = "-".join(str(b) for b in row["path"])
    src = "" if row["source"] is None else row["source"]
    print(f"{row['stage']:>5}  {src!s:>6}  {row['start_time']:5.0f}  {row['connect_time']:7.0f}  {path}")

print("\n t[min]   S_sc[MVA]  M_f[MW/Hz]   P_D[MW]  S_sc/3")
for s in tl.steps[::3]:
    print(f"{s.t:7.0f}  {s.strength.scc:10.2f}  {s.strength.frc:10.2f}  {s.hvdc.p_d:8.2f}  {s.strength.scc / 3:7.2f}")
