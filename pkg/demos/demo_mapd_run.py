"""A seeded pickup-and-delivery run with a live event commentary.

Four blimps hunt eight tethered balloons and carry them to the hoops; the
script prints every state-machine event as the world advances 180
simulated seconds.

Run: python3 demos/demo_mapd_run.py
"""

from blimpsim.world import World, WorldConfig

world = World(WorldConfig(seed=7, n_blimps=4, n_balloons=8,
                          scenario="delivery", state_dir="/tmp/blimpsim-demo"))

print("arena 20 x 15 x 8 m, hoops:",
      ", ".join(f"{h.shape.value}@({h.center[0]:.0f},{h.center[1]:.0f})"
                for h in world.hoops))
print("running 180 simulated seconds...\n")

seen = 0
modes_last = {}
for k in range(int(180.0 / 0.005)):
    world.tick()
    while seen < len(world.events):
        ev = world.events[seen]
        seen += 1
        t, kind, blimp = ev[0], ev[1], ev[2]
        if kind == "attempt":
            print(f"  t={t:6.1f}  blimp {blimp} charges a balloon")
        elif kind == "capture":
            print(f"  t={t:6.1f}  blimp {blimp} CAPTURES balloon {ev[3]}")
        elif kind == "delivery":
            print(f"  t={t:6.1f}  blimp {blimp} DELIVERS balloon {ev[3]} "
                  f"through the {ev[4]} hoop")
    if k % 4000 == 0:
        for rt in world.blimps:
            m = rt.auto.mode.value
            if modes_last.get(rt.ident) != m:
                modes_last[rt.ident] = m

print("\nfinal metrics:", world.metrics)
for rt in world.blimps:
    print(f"  blimp {rt.ident}: mode={rt.auto.mode.value:16s} "
          f"carrying={rt.auto.carrying}  pos="
          f"({rt.state.r[0]:+.1f}, {rt.state.r[1]:+.1f}, {rt.state.r[2]:.1f})")
states = [b.state for b in world.balloons]
print("  balloons:", {s: states.count(s) for s in set(states)})
