"""Regenerate src/tsalign/data/metrics.csv (567 entries, six domain tags).

Names are built as <qualifier>_<base> from per-domain tables; the first
N combinations per domain are kept so the total is exactly 567.
"""

import itertools
from pathlib import Path

TOTAL = 567

# base name -> (low, high, nonneg)
BASES = {
    "AIOps": {
        "cpu_utilization": (0, 100, True),
        "memory_usage": (0, 100, True),
        "disk_usage": (0, 100, True),
        "request_count": (0, 5000, True),
        "error_count": (0, 200, True),
        "latency_ms": (0, 2000, True),
        "qps": (0, 10000, True),
        "network_in_mbps": (0, 1000, True),
        "network_out_mbps": (0, 1000, True),
        "gc_pause_ms": (0, 500, True),
        "thread_count": (0, 2000, True),
        "connection_count": (0, 5000, True),
        "queue_length": (0, 1000, True),
        "io_wait_percent": (0, 100, True),
        "cache_hit_ratio": (0, 100, True),
        "open_file_count": (0, 10000, True),
    },
    "weather": {
        "temperature_celsius": (-30, 45, False),
        "relative_humidity": (0, 100, True),
        "wind_speed": (0, 40, True),
        "air_pressure_hpa": (950, 1050, True),
        "precipitation_mm": (0, 50, True),
        "solar_radiation": (0, 1200, True),
        "dew_point_celsius": (-30, 30, False),
        "visibility_km": (0, 50, True),
        "cloud_cover_percent": (0, 100, True),
        "uv_index": (0, 12, True),
        "soil_moisture": (0, 60, True),
        "snow_depth_cm": (0, 200, True),
        "wind_gust": (0, 60, True),
        "sea_level_pressure": (950, 1050, True),
        "pm25_concentration": (0, 500, True),
        "ozone_ppb": (0, 200, True),
    },
    "finance": {
        "stock_price": (1, 1000, True),
        "trading_volume": (0, 1e7, True),
        "bid_ask_spread": (0, 5, True),
        "daily_return_percent": (-10, 10, False),
        "order_count": (0, 50000, True),
        "account_balance": (0, 1e6, True),
        "transaction_amount": (0, 1e5, True),
        "exchange_rate": (0.5, 2, True),
        "interest_rate_percent": (0, 15, True),
        "volatility_index": (5, 80, True),
        "market_cap_billion": (0, 3000, True),
        "payment_failures": (0, 500, True),
        "revenue": (0, 1e6, True),
        "portfolio_value": (0, 1e7, True),
        "futures_open_interest": (0, 1e6, True),
        "credit_spread_bps": (0, 1000, True),
    },
    "traffic": {
        "vehicle_count": (0, 3000, True),
        "average_speed_kmh": (0, 130, True),
        "lane_occupancy": (0, 100, True),
        "passenger_count": (0, 20000, True),
        "parking_occupancy": (0, 100, True),
        "travel_time_min": (0, 180, True),
        "bike_rentals": (0, 1000, True),
        "ride_requests": (0, 8000, True),
        "flight_delays_min": (0, 300, True),
        "toll_transactions": (0, 10000, True),
        "pedestrian_count": (0, 5000, True),
        "bus_headway_min": (0, 60, True),
        "congestion_index": (0, 10, True),
        "train_load_factor": (0, 150, True),
        "charging_sessions": (0, 500, True),
        "port_throughput_teu": (0, 50000, True),
    },
    "IoT": {
        "sensor_voltage": (0, 12, True),
        "battery_level": (0, 100, True),
        "signal_strength_dbm": (-120, -30, False),
        "device_temperature": (-20, 90, False),
        "power_consumption_kw": (0, 500, True),
        "water_flow_rate": (0, 100, True),
        "vibration_amplitude": (0, 20, True),
        "pressure_bar": (0, 50, True),
        "rpm": (0, 6000, True),
        "current_ampere": (0, 100, True),
        "gas_concentration_ppm": (0, 1000, True),
        "light_intensity_lux": (0, 100000, True),
        "tank_level": (0, 100, True),
        "packet_loss_percent": (0, 100, True),
        "motor_torque": (0, 400, True),
        "frequency_hz": (45, 65, True),
    },
    "health": {
        "heart_rate": (30, 200, True),
        "blood_oxygen": (70, 100, True),
        "respiration_rate": (5, 40, True),
        "systolic_pressure": (80, 200, True),
        "diastolic_pressure": (40, 130, True),
        "body_temperature": (34, 42, True),
        "glucose_level": (40, 400, True),
        "step_count": (0, 20000, True),
        "sleep_depth_index": (0, 10, True),
        "calorie_burn": (0, 1000, True),
        "icu_admissions": (0, 100, True),
        "er_wait_time_min": (0, 480, True),
        "bed_occupancy": (0, 100, True),
        "hrv_ms": (0, 200, True),
        "eeg_alpha_power": (0, 50, True),
        "insulin_dose": (0, 50, True),
    },
}

QUALIFIERS = {
    "AIOps": ["host", "pod", "service", "db", "gateway", "cache"],
    "weather": ["station", "urban", "coastal", "mountain", "airport", "rural"],
    "finance": ["equity", "fx", "retail", "fund", "desk", "branch"],
    "traffic": ["highway", "downtown", "metro", "airport", "bridge", "suburb"],
    "IoT": ["factory", "pump", "meter", "gateway", "turbine", "hvac"],
    "health": ["patient", "ward", "clinic", "wearable", "icu", "outpatient"],
}


def build() -> list[tuple]:
    per_domain = [TOTAL // 6 + (1 if i < TOTAL % 6 else 0) for i in range(6)]
    rows = []
    for (domain, bases), n in zip(BASES.items(), per_domain):
        combos = itertools.product(QUALIFIERS[domain], bases.items())
        for qual, (base, (low, high, nonneg)) in itertools.islice(combos, n):
            rows.append((f"{qual}_{base}", domain, low, high, nonneg))
    assert len(rows) == TOTAL
    assert len({r[0] for r in rows}) == TOTAL
    return rows


def main():
    out = Path(__file__).resolve().parents[1] / "src" / "tsalign" / "data" / "metrics.csv"
    lines = ["# name,domain_tag,low,high,nonneg"]
    for name, tag, low, high, nonneg in build():
        lines.append(f"{name},{tag},{low:g},{high:g},{'true' if nonneg else 'false'}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines) - 1} metrics to {out}")


if __name__ == "__main__":
    main()
