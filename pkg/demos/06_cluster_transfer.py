#!/usr/bin/env python3
"""Cluster-to-cluster bulk transfer over TCP with a transducer pair.

One query on the source cluster runs transfer_send on every segment; one
query on the target runs transfer_recv. The bytes on the wire are the same
frames the pipe protocol uses, so anything that speaks the codec can be a
peer. Here both clusters live in this process, talking over localhost.
"""

import threading
import time

from tdxdb import Database

PORT = 18555
N_ROWS = 50_000

SEND_SQL = f"""
select transducer_col_int8(1) as sent,
       transducer($$PHIExec builtin transfer_send host=127.0.0.1 port={PORT}
# BEGIN INPUT
# id int64
# reading float64
# END INPUT
# BEGIN OUTPUT
# sent int64
# END OUTPUT
$$),
       m.id, m.reading
from measurements m
"""

RECV_SQL = f"""
select transducer_col_int8(1) as id,
       transducer_col_float8(2) as reading,
       transducer($$PHIExec builtin transfer_recv port={PORT} nsenders=2
# BEGIN INPUT
# x int32
# END INPUT
# BEGIN OUTPUT
# id int64
# reading float64
# END OUTPUT
$$),
       s.x
from seed s
"""

rows = [(i, (i % 360) * 0.1) for i in range(N_ROWS)]

source = Database(nseg=2)
source.create_table("measurements", "id:int64,reading:float64", "hash(id)", rows=rows)

target = Database(nseg=2)
target.create_table("seed", "x:int32", "singleton(0)", rows=[(0,)])

received = {}


def run_receiver():
    received["rows"] = target.query(RECV_SQL).rows


receiver = threading.Thread(target=run_receiver)
receiver.start()
time.sleep(0.2)  # let the listener bind

began = time.monotonic()
sent = source.query(SEND_SQL)
receiver.join()
elapsed = time.monotonic() - began

print(f"per-segment send counts: {sorted(sent.rows)}")
print(f"received {len(received['rows'])} rows in {elapsed:.2f}s "
      f"({len(received['rows']) / elapsed:,.0f} rows/s)")
print("multisets equal:", sorted(received["rows"]) == sorted(rows))

# the receiving side is a normal query: filter/aggregate/insert as you like
target.create_table("archive", "id:int64,reading:float64", "hash(id)", rows=received["rows"])
print("archived rows:", target.cluster.get_table("archive").total_rows())
