#!/usr/bin/env python3
"""Basics: load a table across segments, run SQL, read explain trees.

Every query here runs on an in-process cluster: one worker per segment plus
a master that gathers results. Run directly: python demos/01_queries_and_plans.py
"""

from tdxdb import Database

db = Database(nseg=3)

db.create_table(
    "people",
    "id:int32,name:text,age:int32",
    "hash(id)",
    rows=[
        (1, "ada", 36),
        (2, "grace", 45),
        (3, "edsger", 72),
        (4, "barbara", 68),
        (5, "donald", 85),
        (6, "tony", 31),
    ],
)

table = db.cluster.get_table("people")
print("rows per segment:", table.segment_counts())

print("\n-- filter and project --")
result = db.query("select name, age from people where age < 50")
for row in sorted(result.rows):
    print(row)

print("\n-- arithmetic and case expressions --")
result = db.query(
    "select name, case when age >= 65 then 'emeritus' else 'active' end as status "
    "from people where id % 2 = 0"
)
for row in sorted(result.rows):
    print(row)

print("\n-- the physical plan: a gather motion collects segment streams --")
print(db.explain("select name from people where age < 50"))

print("\n-- row_number window: redistribute by partition, number within it --")
print(db.explain("select row_number() over (partition by name order by age), name from people"))
