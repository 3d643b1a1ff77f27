"""Writes data/task_rules.json, the default rule catalog for the 12 tasks.

Thresholds quoted in the task definitions are copied as is. Values the
definitions leave open (region extents, plate radius, "fully" open/closed,
object counts) are chosen here and carry a "note".
"""
import json
import pathlib

REACH = 0.12
LIFT = 0.06
FULLY_OPEN = 0.95
FULLY_CLOSED = 0.05
PLATE_RADIUS = 0.09
INSERT_Z = 1.065


def dist(a, b, op, thr, metric="xyz"):
    return {"kind": "distance", "a": a, "b": b, "metric": metric, "op": op, "threshold": thr}


def count(entities, template, n=None):
    c = {"kind": "count", "entities": entities, "template": template}
    if n is not None:
        c["n"] = n
    return c


def lift(e):
    return {"kind": "height_delta", "entity": e, "op": ">=", "threshold": LIFT}


def region(e, frame, lo, hi):
    return {"kind": "in_region", "entity": e, "frame": frame, "min": lo, "max": hi}


def upright(e):
    return {"kind": "up_axis", "entity": e, "op": ">", "threshold": 0.5}


def inserted(e):
    return {"kind": "and", "items": [
        region(e, "container", [-0.08, -0.12, None], [0.08, 0.12, None]),
        {"kind": "height", "entity": e, "op": "<", "threshold": INSERT_Z},
    ]}


def unloaded(e):
    return {"kind": "and", "items": [
        {"kind": "not", "item": region(e, "container", [-0.08, -0.12, None], [0.08, 0.12, None])},
        upright(e),
        {"kind": "height", "entity": e, "relative_to": "table", "op": ">", "threshold": 0.0},
    ]}


def on_plate(z_tol):
    return {"kind": "and", "items": [
        dist("can", "plate", "<", PLATE_RADIUS, "xy"),
        dist("can", "plate", "<", z_tol, "z"),
    ]}


def fraction(e, op, thr, mode="absolute"):
    return {"kind": "joint_fraction", "entity": e, "mode": mode, "op": op, "threshold": thr}


def sub(name, condition):
    return {"name": name, "condition": condition}


CANS = ["can_1", "can_2"]
SORT = {"sprite_1": "container_left", "sprite_2": "container_left",
        "fanta_1": "container_right", "fanta_2": "container_right"}
BALLS = [f"ball_{i}" for i in range(1, 6)]
CONTAINER_BOX = ([-0.1, -0.15, -0.02], [0.1, 0.15, 0.2])

tasks = [
    {"task": "Push-Box", "instruction": "Push the box to the red marker",
     "success": dist("box", "goal_marker", "<", 0.08),
     "subtasks": [sub("reach", dist("ee", "box", "<", 0.13))]},
    {"task": "Flip-Mug", "instruction": "Flip the mug upright",
     "success": upright("mug"),
     "subtasks": [sub("reach", dist("ee", "mug", "<", REACH))]},
    {"task": "Pour-Balls", "instruction": "Pour the balls into the mug",
     "note": "5 balls and the mug interior box (relative to the mug origin) are scene assumptions.",
     "success": count(BALLS, region("$e", "mug", [-0.04, -0.04, -0.01], [0.04, 0.04, 0.12]), 3),
     "subtasks": [sub("reach", dist("ee", "bottle", "<", REACH)), sub("lift", lift("bottle"))]},
    {"task": "Sort-Cans", "instruction": "Put the Sprite cans in the left container and the Fanta cans in the right",
     "note": "Container interiors are axis-aligned boxes around each container origin.",
     "success": {"kind": "count", "items": [region(c, box, *CONTAINER_BOX) for c, box in SORT.items()]},
     "subtasks": [sub("reach", count(list(SORT), dist("ee", "$e", "<", REACH), 1)),
                  sub("lift", count(list(SORT), lift("$e"), 1)),
                  sub("sort", {"kind": "count", "n": 1,
                               "items": [region(c, box, *CONTAINER_BOX) for c, box in SORT.items()]})]},
    {"task": "Insert-Cans", "instruction": "Insert the cans into the container",
     "note": "Two cans; 1.065 is an absolute world z specific to the benchmark scene.",
     "success": count(CANS, inserted("$e")),
     "subtasks": [sub("reach", count(CANS, dist("ee", "$e", "<", REACH), 1)),
                  sub("lift", count(CANS, lift("$e"), 1)),
                  sub("insert", count(CANS, inserted("$e"), 1))]},
    {"task": "Unload-Cans", "instruction": "Unload the cans from the container",
     "note": "Two cans; table height comes from the 'table' entity.",
     "success": count(CANS, unloaded("$e")),
     "subtasks": [sub("reach", count(CANS, dist("ee", "$e", "<", REACH), 1)),
                  sub("lift", count(CANS, lift("$e"), 1)),
                  sub("unload", count(CANS, unloaded("$e"), 1))]},
    {"task": "Insert-And-Unload-Cans", "instruction": "Insert the cans into the container, then unload them",
     "success": count(CANS, {"kind": "ordered", "first": inserted("$e"), "then": unloaded("$e")}),
     "subtasks": [sub("reach", count(CANS, dist("ee", "$e", "<", REACH), 1)),
                  sub("lift", count(CANS, lift("$e"), 1)),
                  sub("insert", count(CANS, inserted("$e"), 1)),
                  sub("unload", count(CANS, unloaded("$e"), 1))]},
    {"task": "Close-Drawer", "instruction": "Close the drawer",
     "note": "'Fully closed' is taken as joint fraction below 0.05.",
     "success": fraction("drawer", "<", FULLY_CLOSED),
     "subtasks": [sub("reach", dist("ee", "drawer_handle", "<", REACH)),
                  sub("move-door", fraction("drawer", "<=", -0.1, "delta"))]},
    {"task": "Open-Drawer", "instruction": "Open the drawer",
     "note": "'Fully open' is taken as joint fraction above 0.95.",
     "success": fraction("drawer", ">", FULLY_OPEN),
     "subtasks": [sub("reach", dist("ee", "drawer_handle", "<", REACH)),
                  sub("move-door", fraction("drawer", ">=", 0.1, "delta"))]},
    {"task": "Stack-Can", "instruction": "Stack the can on the plate",
     "note": "Plate radius 0.09 m is a scene assumption; z difference is absolute.",
     "success": on_plate(0.02),
     "subtasks": [sub("place", on_plate(0.05))]},
    {"task": "Stack-Can-Into-Drawer", "instruction": "Put the can on the plate in the drawer and close it",
     "note": "Plate radius 0.09 m and drawer closed below 0.05 joint fraction are assumptions.",
     "success": {"kind": "and", "items": [on_plate(0.02)["items"][0], on_plate(0.02)["items"][1],
                                          fraction("drawer", "<", FULLY_CLOSED)]},
     "subtasks": [sub("reach_drawer", dist("ee_left", "drawer_handle", "<", REACH)),
                  sub("reach_can", dist("ee_right", "can", "<", REACH)),
                  sub("lift", lift("can"))]},
    {"task": "Open-Laptop", "instruction": "Open the laptop",
     "success": fraction("laptop", ">=", 0.7),
     "subtasks": [sub("move_lid", fraction("laptop", ">=", 0.15))]},
]

out = pathlib.Path(__file__).resolve().parent.parent / "data" / "task_rules.json"
out.write_text(json.dumps({"schema": "etr-1", "tasks": tasks}, indent=2) + "\n")
print(f"wrote {out} ({len(tasks)} tasks)")
