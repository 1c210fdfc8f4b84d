#!/usr/bin/env python3
"""Regenerates data/casa/workflow.yaml (nowcast-style fan-out/fan-in DAG).

Levels: 3 nowcast tasks -> 48 contour tasks -> 12 merge tasks (63 total).
"""
import pathlib

MB = 1_000_000
out = pathlib.Path(__file__).resolve().parent.parent / "data" / "casa" / "workflow.yaml"

lines = ["# 63 tasks: 3 nowcast, 48 contour, 12 merge", "tasks:"]
files = ["files:"]
for i in range(3):
    radar = f"radar_{i}.nc"
    files.append(f"  - {{name: {radar}, size: {5 * MB}, location: \"file:///local/inputs/{radar}\"}}")
    grids = [f"grid_{i}_{g:02d}.nc" for g in range(16)]
    lines.append(f"  - id: nowcast_{i}")
    lines.append("    transformation: \"casa::nowcast:1.0\"")
    lines.append(f"    inputs: [{radar}]")
    lines.append(f"    outputs: [{', '.join(grids)}]")
    lines.append("    runtime: 2.0")
    for g in grids:
        files.append(f"  - {{name: {g}, size: {2 * MB}}}")
for j in range(48):
    grid = f"grid_{j // 16}_{j % 16:02d}.nc"
    lines.append(f"  - id: contour_{j:02d}")
    lines.append("    transformation: \"casa::contour:1.0\"")
    lines.append(f"    inputs: [{grid}]")
    lines.append(f"    outputs: [nowcast_{j:02d}.png, contour_{j:02d}.geojson]")
    lines.append("    runtime: 1.5")
    files.append(f"  - {{name: nowcast_{j:02d}.png, size: {MB // 2}}}")
    files.append(f"  - {{name: contour_{j:02d}.geojson, size: {MB // 5}}}")
for m in range(12):
    ins = ", ".join(f"contour_{4 * m + k:02d}.geojson" for k in range(4))
    lines.append(f"  - id: merge_{m:02d}")
    lines.append("    transformation: \"casa::merge:1.0\"")
    lines.append(f"    inputs: [{ins}]")
    lines.append(f"    outputs: [alert_{m:02d}.json]")
    lines.append("    runtime: 1.0")
    files.append(f"  - {{name: alert_{m:02d}.json, size: {MB // 10}}}")

out.write_text("\n".join(lines + files) + "\n")
print(f"wrote {out}")
