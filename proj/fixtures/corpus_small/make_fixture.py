# One-off generator for the small corpus fixture and its golden statistics.
# The golden numbers are recounted here from the plain paragraph text, which
# the cleaner must reproduce exactly (each body holds a single <p>).
import csv, datetime

texts = {
    1: "Acme Widgets reported record revenue growth and strong net income for the quarter, with margin expansion across segments.",
    2: "Beta Oil announced a net loss for the quarter as lower oil prices reduced revenue; the company reaffirmed its annual outlook.",
    3: "Acme Widgets reported quarterly net income below expectations as raw material costs rose and demand softened in Europe.",
    4: "Gamma Bank reported higher net interest income, improved credit quality and loan growth in its commercial banking division.",
    5: "Beta Oil reported a return to profitability driven by higher production volumes and disciplined capital spending this year.",
    6: "Too short.",
}
# doc_id -> (permno, announce_ts ET, expected tau_eff)
meta = {
    1: (10001, "2010-02-02T17:05:00-05:00", "2010-02-03"),
    2: (10002, "2010-02-03T07:30:00-05:00", "2010-02-03"),
    3: (10001, "2010-10-29T18:00:00-04:00", "2010-11-01"),
    4: (10003, "2011-04-19T16:00:00-04:00", "2011-04-20"),
    5: (10002, "2011-07-26T08:15:00-04:00", "2011-07-26"),
    6: (10003, "2011-07-27T17:00:00-04:00", "2011-07-28"),
}
with open("manifest.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["doc_id", "permno", "announce_ts", "html_path"])
    for d, (p, ts, _) in meta.items():
        w.writerow([d, p, ts, f"html/{d}.html"])
        with open(f"html/{d}.html", "w") as h:
            h.write(f"<html><head><title>ex99</title></head><body>\n<p>{texts[d]}</p>\n<table><tr><td>1.0</td></tr></table>\n</body></html>\n")

with open("golden_stats.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["year", "article_count", "distinct_stock_count", "mean_char_count"])
    years = {}
    for d, (p, ts, tau) in meta.items():
        if len(texts[d]) < 100:
            continue
        years.setdefault(int(tau[:4]), []).append((p, len(texts[d])))
    for y in sorted(years):
        rows = years[y]
        w.writerow([y, len(rows), len({p for p, _ in rows}), repr(sum(n for _, n in rows) / len(rows))])

# calendar: weekdays in 2010-2011
with open("calendar.txt", "w") as f:
    day = datetime.date(2010, 1, 4)
    while day <= datetime.date(2011, 12, 30):
        if day.weekday() < 5 and (day.month, day.day) not in {(1, 1), (7, 4), (12, 25)}:
            f.write(day.isoformat() + "\n")
        day += datetime.timedelta(days=1)
