"""Regenerates trips.csv: a taxi-like table whose dropoff time and fare track
pickup time and distance, with a minority of irregular trips."""
import random

rng = random.Random(7)
zones = ["JFK", "LGA", "MID", "UES", "UWS", "BK", "QN", "BX"]
rows = []
for i in range(10000):
    pickup = rng.randrange(0, 30 * 86400)
    distance = round(rng.expovariate(1 / 3.0), 2)
    minutes = distance * 3 + rng.uniform(2, 8)
    if rng.random() < 0.1:
        minutes += rng.uniform(30, 600)  # stuck in traffic or meter left running
    dropoff = pickup + int(minutes * 60)
    fare = round(2.5 + distance * 2.5 + minutes * 0.5, 2)
    rows.append((i, pickup, dropoff, distance, fare, rng.choice(zones)))

with open("trips.csv", "w") as f:
    f.write("trip_id,pickup_time,dropoff_time,distance,fare,zone\n")
    for r in rows:
        f.write(f"{r[0]},{r[1]},{r[2]},{r[3]:.2f},{r[4]:.2f},{r[5]}\n")
