#!/usr/bin/env python3
"""Draws the bundled chart images and writes the mini-vlat and vlat question sets.

Charts are redrawn from small synthetic tables; every numeric answer key below is
read from the same table that is plotted, so keys and pixels always agree.

    python3 tools/make_question_sets.py [--out data]
"""

import argparse
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (4.8, 3.6)
DPI = 100

MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]

INTERNET = {
    "Australia": 12, "China": 18, "Germany": 21, "India": 8,
    "Japan": 40, "South Korea": 29, "United Kingdom": 22, "United States": 26,
}

OIL_2020 = [57.5, 50.5, 29.2, 16.6, 28.6, 38.3, 40.7, 42.3, 39.6, 39.4, 41.4, 47.0]

SNACK_CITIES = ["Seoul", "Tokyo", "Beijing", "Sydney", "London", "New York"]
SNACKS = {
    "Peanuts": [6.1, 4.2, 3.0, 5.0, 3.6, 4.8],
    "Soda": [2.1, 1.6, 0.9, 2.4, 1.9, 2.0],
    "Sandwich": [6.5, 7.1, 4.4, 8.2, 7.6, 9.4],
}

MEDAL_COUNTRIES = ["Canada", "Great Britain", "Japan", "United States", "Germany"]
MEDALS = {"Gold": [21, 44, 33, 39, 27], "Silver": [36, 28, 31, 33, 37], "Bronze": [43, 28, 36, 28, 36]}

PHONES = {"Samsung": 23, "Apple": 21, "Xiaomi": 13, "Oppo": 10, "Vivo": 9, "Others": 24}

TAXI_BINS = [0, 10, 20, 30, 40, 50, 60]
TAXI_COUNTS = [25, 40, 55, 80, 45, 20]

COFFEE_2019 = [4.9, 4.8, 4.7, 4.6, 4.5, 4.6, 4.8, 4.9, 5.1, 5.0, 5.2, 5.4]
COFFEE_2020 = [5.3, 5.2, 5.5, 5.6, 5.5, 5.4, 5.6, 5.8, 5.9, 5.9, 6.1, 6.3]

NAME_YEARS = list(range(2010, 2021))
NAMES = {
    "Olivia": [5.2, 5.3, 5.1, 5.4, 5.6, 5.5, 5.3, 5.1, 5.0, 4.9, 4.8],
    "Amelia": [3.0, 3.5, 4.0, 4.5, 4.9, 5.2, 5.5, 5.7, 5.6, 5.4, 5.2],
    "Isla": [2.6, 3.3, 4.0, 4.2, 4.1, 4.0, 3.9, 3.8, 3.7, 3.6, 3.4],
    "Ava": [3.8, 3.6, 3.5, 3.4, 3.2, 3.1, 3.0, 3.1, 3.2, 3.3, 3.5],
}

# city: (system length km, stations, annual ridership billions)
METRO = {
    "Shanghai": (676, 415, 2.8),
    "Beijing": (640, 392, 2.3),
    "Moscow": (408, 250, 2.5),
    "Tokyo": (304, 285, 3.5),
    "Seoul": (331, 302, 2.0),
    "London": (402, 270, 1.3),
    "New York": (380, 300, 1.7),
}

# state: (tile col, tile row, unemployment % 2020)
STATES = {
    "WA": (0, 0, 8.4), "ID": (1, 0, 5.4), "MT": (2, 0, 5.8), "ND": (3, 0, 5.1), "MN": (4, 0, 6.2),
    "WI": (5, 0, 6.3), "MI": (6, 0, 9.9), "NY": (8, 0, 9.8), "VT": (9, 0, 5.6), "ME": (10, 0, 5.4),
    "OR": (0, 1, 7.6), "NV": (1, 1, 12.8), "WY": (2, 1, 5.8), "SD": (3, 1, 4.2), "IA": (4, 1, 5.3),
    "IL": (5, 1, 9.5), "IN": (6, 1, 7.1), "OH": (7, 1, 8.1), "PA": (8, 1, 8.9), "NJ": (9, 1, 9.8),
    "CA": (0, 2, 10.1), "UT": (1, 2, 4.7), "CO": (2, 2, 7.3), "NE": (3, 2, 4.2), "MO": (4, 2, 6.1),
    "KY": (5, 2, 6.6), "WV": (6, 2, 8.3), "VA": (7, 2, 6.2), "MD": (8, 2, 6.8),
    "AZ": (1, 3, 7.7), "NM": (2, 3, 8.1), "KS": (3, 3, 5.7), "AR": (4, 3, 6.1), "TN": (5, 3, 7.5),
    "NC": (6, 3, 7.2), "SC": (7, 3, 6.2), "TX": (3, 4, 7.6), "LA": (4, 4, 8.3), "MS": (5, 4, 8.1),
    "AL": (6, 4, 6.5), "GA": (7, 4, 6.5), "FL": (8, 5, 8.2),
}

# category: {company: market cap, billions}
TREEMAP = {
    "Software": {"Microsoft": 1600, "Oracle": 180, "Adobe": 230},
    "Retail": {"Amazon": 1500, "eBay": 120, "Walmart": 400},
    "Computer": {"Apple": 2000, "Dell": 150, "HP": 110},
    "Internet": {"Google": 1200, "Facebook": 750},
}


def scatter_data():
    rng = np.random.default_rng(85)
    height = np.round(rng.uniform(160.0, 195.0, 85), 1)
    weight = np.round(0.9 * height - 85.0 + rng.normal(0.0, 6.0, 85), 1)
    return height, weight


def save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)


def draw_bar(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.barh(list(INTERNET), list(INTERNET.values()), color="#4c72b0")
    ax.set_xlabel("Mbps")
    ax.set_title("Global Internet Speed (Mbps)")
    ax.invert_yaxis()
    save(fig, path)


def draw_line(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(MONTHS, OIL_2020, marker="o", color="#c44e52")
    ax.set_ylabel("Price ($ per barrel)")
    ax.set_title("Oil Prices in 2020")
    ax.grid(alpha=0.3)
    ax.tick_params(axis="x", labelsize=7)
    save(fig, path)


def draw_stacked_bar(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    bottom = np.zeros(len(SNACK_CITIES))
    for name, values in SNACKS.items():
        ax.bar(SNACK_CITIES, values, bottom=bottom, label=name)
        for i, v in enumerate(values):
            ax.text(i, bottom[i] + v / 2, f"{v}", ha="center", va="center", fontsize=6)
        bottom += np.array(values)
    ax.set_ylabel("Cost ($)")
    ax.set_title("Cost of Snacks in Cities")
    ax.tick_params(axis="x", labelsize=7)
    ax.legend(fontsize=7)
    save(fig, path)


def draw_100_stacked(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    left = np.zeros(len(MEDAL_COUNTRIES))
    colors = {"Gold": "#d4af37", "Silver": "#a8a9ad", "Bronze": "#b08d57"}
    for medal, values in MEDALS.items():
        ax.barh(MEDAL_COUNTRIES, values, left=left, label=medal, color=colors[medal])
        for i, v in enumerate(values):
            ax.text(left[i] + v / 2, i, f"{v}%", ha="center", va="center", fontsize=6)
        left += np.array(values)
    ax.set_xlabel("Share of medals (%)")
    ax.set_title("Olympic Medals Won by Country")
    ax.invert_yaxis()
    ax.legend(fontsize=7, loc="lower right")
    save(fig, path)


def draw_pie(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.pie(list(PHONES.values()), labels=list(PHONES), autopct="%d%%", startangle=90, counterclock=False,
           textprops={"fontsize": 7})
    ax.set_title("Global Smartphone Market Share (%)")
    save(fig, path)


def draw_histogram(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.bar(TAXI_BINS[:-1], TAXI_COUNTS, width=10, align="edge", edgecolor="black", color="#55a868")
    ax.set_xticks(TAXI_BINS)
    ax.set_xlabel("Distance (km)")
    ax.set_ylabel("Number of customers")
    ax.set_title("Taxi Passenger Trip Distances")
    save(fig, path)


def draw_scatter(path):
    height, weight = scatter_data()
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.scatter(height, weight, s=10, color="#8172b2")
    ax.set_xlabel("Height (cm)")
    ax.set_ylabel("Weight (kg)")
    ax.set_title("Height vs. Weight of 85 Males")
    save(fig, path)


def draw_area(path):
    values = COFFEE_2019 + COFFEE_2020
    labels = [f"{m} {y}" for y in (2019, 2020) for m in MONTHS]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    x = np.arange(len(values))
    ax.fill_between(x, values, color="#937860", alpha=0.7)
    ax.plot(x, values, color="#5a4632")
    ax.set_xticks(x[::3])
    ax.set_xticklabels(labels[::3], rotation=45, fontsize=6)
    ax.set_ylim(0, 7)
    ax.set_ylabel("Price ($ per lb)")
    ax.set_title("Average Coffee Bean Price")
    save(fig, path)


def draw_stacked_area(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.stackplot(NAME_YEARS, *NAMES.values(), labels=list(NAMES))
    ax.set_ylabel("Girls named (thousands)")
    ax.set_title("Popular Girls' Names in the UK")
    ax.legend(fontsize=7, loc="upper left")
    save(fig, path)


def draw_bubble(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for city, (length, stations, riders) in METRO.items():
        ax.scatter(length, riders, s=stations * 1.5, alpha=0.5)
        ax.annotate(city, (length, riders), fontsize=6, ha="center")
    ax.set_xlabel("System length (km)")
    ax.set_ylabel("Ridership (billions/year)")
    ax.set_title("Metro Systems (bubble size = stations)")
    ax.set_xlim(250, 750)
    ax.set_ylim(1.0, 4.0)
    save(fig, path)


def draw_choropleth(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    cmap = plt.get_cmap("Blues")
    lo, hi = 4.0, 13.0
    for state, (col, row, rate) in STATES.items():
        ax.add_patch(plt.Rectangle((col, -row), 0.95, 0.95, color=cmap((rate - lo) / (hi - lo))))
        ax.text(col + 0.47, -row + 0.47, state, ha="center", va="center", fontsize=5,
                color="white" if rate > 8.5 else "black")
    ax.set_xlim(-0.2, 11.2)
    ax.set_ylim(-5.2, 1.2)
    ax.set_aspect("equal")
    ax.axis("off")
    sm = plt.cm.ScalarMappable(cmap=cmap, norm=plt.Normalize(lo, hi))
    fig.colorbar(sm, ax=ax, orientation="horizontal", fraction=0.05, label="Unemployment rate 2020 (%)")
    ax.set_title("Unemployment Rates by State, 2020")
    save(fig, path)


def slice_and_dice(items, x, y, w, h, horizontal):
    total = float(sum(v for _, v in items))
    out = []
    for name, v in items:
        frac = v / total
        if horizontal:
            out.append((name, x, y, w * frac, h))
            x += w * frac
        else:
            out.append((name, x, y, w, h * frac))
            y += h * frac
    return out


def draw_treemap(path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    cats = [(c, sum(m.values())) for c, m in TREEMAP.items()]
    palette = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"]
    for i, (cat, cx, cy, cw, ch) in enumerate(slice_and_dice(cats, 0.0, 0.0, 1.0, 1.0, True)):
        members = sorted(TREEMAP[cat].items(), key=lambda kv: -kv[1])
        for name, x, y, w, h in slice_and_dice(members, cx, cy, cw, ch, False):
            ax.add_patch(plt.Rectangle((x, y), w, h, facecolor=palette[i], edgecolor="white", linewidth=1.5))
            if h > 0.03:
                ax.text(x + 0.01, y + h - 0.01, name, fontsize=6, va="top", color="white")
        ax.add_patch(plt.Rectangle((cx, cy), cw, ch, fill=False, edgecolor="black", linewidth=2))
        ax.text(cx + cw / 2, 1.02, cat, ha="center", fontsize=7, fontweight="bold")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.08)
    ax.axis("off")
    ax.set_title("Market Cap of Tech Companies ($B)", fontsize=9)
    save(fig, path)


CHARTS = {
    "bar": ("bar.png", draw_bar),
    "line": ("line.png", draw_line),
    "stacked_bar": ("stacked_bar.png", draw_stacked_bar),
    "stacked_bar_100": ("stacked_bar_100.png", draw_100_stacked),
    "pie": ("pie.png", draw_pie),
    "histogram": ("histogram.png", draw_histogram),
    "scatter": ("scatter.png", draw_scatter),
    "area": ("area.png", draw_area),
    "stacked_area": ("stacked_area.png", draw_stacked_area),
    "bubble": ("bubble.png", draw_bubble),
    "choropleth": ("choropleth.png", draw_choropleth),
    "treemap": ("treemap.png", draw_treemap),
}


def num(value, unit="", tolerance=None):
    key = {"kind": "numeric", "value": round(float(value), 4), "unit": unit}
    if tolerance is not None:
        key["tolerance"] = tolerance
    return key


def cat(*accepted):
    return {"kind": "categorical", "accepted": list(accepted)}


def boolean(value):
    return {"kind": "boolean", "accepted": ["true", "yes"] if value else ["false", "no"]}


def mini_vlat_items():
    """(chart, task, question, key, options) in test order."""
    isla, amelia = NAMES["Isla"][2], NAMES["Amelia"][2]
    return [
        ("bar", "retrieve_value", "What is the average internet speed in Japan?", num(INTERNET["Japan"], "Mbps"), []),
        ("line", "retrieve_value", "What was the price of a barrel of oil in February 2020?",
         num(OIL_2020[1], "$"), []),
        ("stacked_bar", "retrieve_value", "What is the cost of peanuts in Seoul?",
         num(SNACKS["Peanuts"][0], "$"), []),
        ("stacked_bar_100", "find_extremum", "Which country has the highest proportion of Gold medals?",
         cat("Great Britain", "GB", "UK", "United Kingdom"), MEDAL_COUNTRIES),
        ("pie", "retrieve_value", "What is the approximate global smartphone market share of Samsung?",
         num(PHONES["Samsung"], "%"), []),
        ("histogram", "find_extremum", "What distance have customers traveled in the taxi the most?",
         num(35, "km", 5.0), []),
        ("scatter", "find_correlations",
         "True/False: There is a negative linear relationship between the height and the weight of the 85 males.",
         boolean(False), ["True", "False"]),
        ("area", "retrieve_value", "What was the average price of a pound of coffee beans in October 2019?",
         num(COFFEE_2019[9], "$", 0.5), []),
        ("stacked_area", "make_comparisons",
         "What was the ratio of girls named 'Isla' to girls named 'Amelia' in 2012 in the UK?",
         num(isla / amelia, "", 0.1), []),
        ("bubble", "find_extremum", "Which city's metro system has the largest number of stations?",
         cat(max(METRO, key=lambda c: METRO[c][1])), list(METRO)),
        ("choropleth", "make_comparisons",
         "True/False: In 2020, the unemployment rate for Washington (WA) was higher than that of Wisconsin (WI).",
         boolean(STATES["WA"][2] > STATES["WI"][2]), ["True", "False"]),
        ("treemap", "identify_hierarchy", "True/False: eBay is nested in the Software category.",
         boolean("eBay" in TREEMAP["Software"]), ["True", "False"]),
    ]


def vlat_items():
    height, weight = scatter_data()
    coffee = COFFEE_2019 + COFFEE_2020
    snack_totals = [round(sum(v[i] for v in SNACKS.values()), 1) for i in range(len(SNACK_CITIES))]
    name_totals_2020 = {n: v[-1] for n, v in NAMES.items()}
    tallest = int(np.argmax(height))
    lightest = int(np.argmin(weight))
    by_length = max(METRO, key=lambda c: METRO[c][0])
    by_riders = max(METRO, key=lambda c: METRO[c][2])
    min_riders = min(METRO, key=lambda c: METRO[c][2])
    max_state = max(STATES, key=lambda s: STATES[s][2])
    biggest = max(((c, n, v) for c, m in TREEMAP.items() for n, v in m.items()), key=lambda t: t[2])
    largest_cat = max(TREEMAP, key=lambda c: sum(TREEMAP[c].values()))

    return [
        # line (6)
        ("line", "retrieve_value", "What was the price of a barrel of oil in February 2020?", num(OIL_2020[1], "$"), []),
        ("line", "find_extremum", "In which month was the price of a barrel of oil the lowest in 2020?",
         cat("April", "Apr"), MONTHS),
        ("line", "determine_range", "What was the price range of a barrel of oil in 2020?",
         num(max(OIL_2020) - min(OIL_2020), "$"), []),
        ("line", "find_trends", "Over the first half of 2020, was the price of a barrel of oil increasing or decreasing?",
         cat("decreasing", "falling", "declining", "dropping"), ["increasing", "decreasing", "staying the same"]),
        ("line", "make_comparisons", "About how much did the price of a barrel of oil rise from April to August in 2020?",
         num(OIL_2020[7] - OIL_2020[3], "$"), []),
        ("line", "make_comparisons", "True/False: The price of a barrel of oil was higher in March than in May.",
         boolean(OIL_2020[2] > OIL_2020[4]), ["True", "False"]),
        # bar (5)
        ("bar", "retrieve_value", "What is the average internet speed in Japan?", num(INTERNET["Japan"], "Mbps"), []),
        ("bar", "find_extremum", "In which country is the average internet speed the slowest?",
         cat(min(INTERNET, key=INTERNET.get)), list(INTERNET)),
        ("bar", "determine_range", "What is the range of the average internet speed among the countries?",
         num(max(INTERNET.values()) - min(INTERNET.values()), "Mbps"), []),
        ("bar", "make_comparisons", "True/False: The average internet speed of China is faster than that of Germany.",
         boolean(INTERNET["China"] > INTERNET["Germany"]), ["True", "False"]),
        ("bar", "make_comparisons",
         "How much faster is the average internet speed in South Korea than in the United States?",
         num(INTERNET["South Korea"] - INTERNET["United States"], "Mbps"), []),
        # stacked bar (4)
        ("stacked_bar", "retrieve_value", "What is the cost of peanuts in Seoul?", num(SNACKS["Peanuts"][0], "$"), []),
        ("stacked_bar", "find_extremum", "Which city has the highest total cost of the snacks?",
         cat(SNACK_CITIES[int(np.argmax(snack_totals))]), SNACK_CITIES),
        ("stacked_bar", "make_comparisons", "True/False: The cost of soda in Sydney is higher than in Tokyo.",
         boolean(SNACKS["Soda"][3] > SNACKS["Soda"][1]), ["True", "False"]),
        ("stacked_bar", "retrieve_value", "What is the total cost of the snacks in Beijing?",
         num(snack_totals[2], "$", 0.5), []),
        # 100% stacked bar (3)
        ("stacked_bar_100", "find_extremum", "Which country has the highest proportion of Gold medals?",
         cat("Great Britain", "GB", "UK", "United Kingdom"), MEDAL_COUNTRIES),
        ("stacked_bar_100", "retrieve_value", "What is the percentage of silver medals won by Japan?",
         num(MEDALS["Silver"][2], "%"), []),
        ("stacked_bar_100", "make_comparisons",
         "True/False: The proportion of bronze medals won by Canada is larger than that of Germany.",
         boolean(MEDALS["Bronze"][0] > MEDALS["Bronze"][4]), ["True", "False"]),
        # pie (3)
        ("pie", "retrieve_value", "What is the approximate global smartphone market share of Samsung?",
         num(PHONES["Samsung"], "%"), []),
        ("pie", "find_extremum", "Which named company has the largest market share?",
         cat(max((k for k in PHONES if k != "Others"), key=PHONES.get)), list(PHONES)),
        ("pie", "make_comparisons", "True/False: Xiaomi has a larger market share than Oppo.",
         boolean(PHONES["Xiaomi"] > PHONES["Oppo"]), ["True", "False"]),
        # histogram (3)
        ("histogram", "find_extremum", "What distance have customers traveled in the taxi the most?",
         num(35, "km", 5.0), []),
        ("histogram", "retrieve_value", "How many customers traveled between 20 and 30 km?",
         num(TAXI_COUNTS[2]), []),
        ("histogram", "make_comparisons",
         "True/False: More customers traveled between 40 and 50 km than between 10 and 20 km.",
         boolean(TAXI_COUNTS[4] > TAXI_COUNTS[1]), ["True", "False"]),
        # scatter (6)
        ("scatter", "find_correlations",
         "True/False: There is a negative linear relationship between the height and the weight of the 85 males.",
         boolean(False), ["True", "False"]),
        ("scatter", "find_extremum", "What is the height of the tallest person?", num(height[tallest], "cm"), []),
        ("scatter", "retrieve_value", "What is the weight of the tallest person?", num(weight[tallest], "kg", 3.0), []),
        ("scatter", "find_extremum", "What is the weight of the lightest person?", num(weight[lightest], "kg"), []),
        ("scatter", "determine_range", "What is the range in weight for the 85 males?",
         num(weight.max() - weight.min(), "kg", 3.0), []),
        ("scatter", "find_clusters", "True/False: Most of the males weigh more than 100 kg.",
         boolean(bool((weight > 100).sum() > 42)), ["True", "False"]),
        # area (5)
        ("area", "retrieve_value", "What was the average price of a pound of coffee beans in October 2019?",
         num(COFFEE_2019[9], "$", 0.5), []),
        ("area", "find_extremum", "In which month and year was the price of coffee beans the highest?",
         cat("December 2020", "Dec 2020"), []),
        ("area", "determine_range", "What was the range of the average price of a pound of coffee beans?",
         num(max(coffee) - min(coffee), "$", 0.5), []),
        ("area", "find_trends", "Over the course of 2020, was the price of a pound of coffee beans increasing or decreasing?",
         cat("increasing", "rising", "growing"), ["increasing", "decreasing", "staying the same"]),
        ("area", "make_comparisons", "True/False: Coffee beans cost more in March 2020 than in March 2019.",
         boolean(COFFEE_2020[2] > COFFEE_2019[2]), ["True", "False"]),
        # stacked area (5)
        ("stacked_area", "make_comparisons",
         "What was the ratio of girls named 'Isla' to girls named 'Amelia' in 2012 in the UK?",
         num(NAMES["Isla"][2] / NAMES["Amelia"][2], "", 0.1), []),
        ("stacked_area", "find_trends", "From 2010 to 2016, was the number of girls named 'Amelia' increasing or decreasing?",
         cat("increasing", "rising", "growing"), ["increasing", "decreasing", "staying the same"]),
        ("stacked_area", "find_extremum", "Which name was the most popular in 2020?",
         cat(max(name_totals_2020, key=name_totals_2020.get)), list(NAMES)),
        ("stacked_area", "retrieve_value", "About how many thousand girls were named 'Olivia' in 2015?",
         num(NAMES["Olivia"][5], "", 0.5), []),
        ("stacked_area", "make_comparisons", "True/False: More girls were named 'Ava' than 'Isla' in 2010.",
         boolean(NAMES["Ava"][0] > NAMES["Isla"][0]), ["True", "False"]),
        # bubble (6)
        ("bubble", "find_extremum", "Which city's metro system has the largest number of stations?",
         cat(max(METRO, key=lambda c: METRO[c][1])), list(METRO)),
        ("bubble", "find_extremum", "Which city's metro system is the longest?", cat(by_length), list(METRO)),
        ("bubble", "find_extremum", "Which city's metro system has the highest ridership?", cat(by_riders), list(METRO)),
        ("bubble", "retrieve_value", "What is the total system length of the Seoul metro?",
         num(METRO["Seoul"][0], "km", 20.0), []),
        ("bubble", "find_extremum", "Which city's metro system has the lowest ridership?", cat(min_riders), list(METRO)),
        ("bubble", "make_comparisons", "True/False: The Moscow metro is longer than the London metro.",
         boolean(METRO["Moscow"][0] > METRO["London"][0]), ["True", "False"]),
        # choropleth (3)
        ("choropleth", "make_comparisons",
         "True/False: In 2020, the unemployment rate for Washington (WA) was higher than that of Wisconsin (WI).",
         boolean(STATES["WA"][2] > STATES["WI"][2]), ["True", "False"]),
        ("choropleth", "find_extremum", "Which state had the highest unemployment rate in 2020?",
         cat(max_state, "Nevada"), list(STATES)),
        ("choropleth", "retrieve_value", "What was the unemployment rate for California (CA) in 2020?",
         num(STATES["CA"][2], "%"), []),
        # treemap (4)
        ("treemap", "identify_hierarchy", "True/False: eBay is nested in the Software category.",
         boolean("eBay" in TREEMAP["Software"]), ["True", "False"]),
        ("treemap", "find_extremum", "Which company has the largest market cap?", cat(biggest[1]), []),
        ("treemap", "find_extremum", "Which category has the largest total market cap?", cat(largest_cat),
         list(TREEMAP)),
        ("treemap", "identify_hierarchy", "True/False: Dell is nested in the Computer category.",
         boolean("Dell" in TREEMAP["Computer"]), ["True", "False"]),
    ]


def write_set(path, set_id, source, prefix, items, chart_dir_rel):
    doc = {"schema_version": 1, "set_id": set_id, "items": []}
    for i, (chart, task, question, key, options) in enumerate(items, start=1):
        doc["items"].append({
            "id": f"{prefix}{i}",
            "source": source,
            "chart_type": chart,
            "task_type": task,
            "image_path": f"{chart_dir_rel}/{CHARTS[chart][0]}",
            "question": question,
            "answer_key": key,
            "options": options,
        })
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = parser.parse_args()

    charts = os.path.join(args.out, "charts")
    sets = os.path.join(args.out, "question_sets")
    os.makedirs(charts, exist_ok=True)
    os.makedirs(sets, exist_ok=True)
    for filename, draw in CHARTS.values():
        draw(os.path.join(charts, filename))

    mini, full = mini_vlat_items(), vlat_items()
    assert len(mini) == 12 and len(full) == 53, (len(mini), len(full))
    write_set(os.path.join(sets, "mini_vlat.json"), "mini-vlat", "mini_vlat", "Q", mini, "../charts")
    write_set(os.path.join(sets, "vlat.json"), "vlat", "vlat", "V", full, "../charts")


if __name__ == "__main__":
    main()
