"""A simulated data directory whose media features come from a weekly series.

Users carry a location and an activation time instead of M_* columns, so the
loader derives the features and the gap setting changes the long-term window.
"""
import datetime
import os

import numpy as np
import pandas as pd

from climact.data.ingestion import MEDIA_OVERRIDES, iso_week_label, save_dataset
from climact.model.sampler import default_parameters, forward_sample, synthetic_catalog
from climact.model.types import THEMES

FIRST_MONDAY = datetime.date(2018, 9, 24)
N_WEEKS = 70
AREAS = ('CA', 'NY', 'TX')

# attention per (week index, theme); the last weeks before activation differ from the rest of the year
SHAPES = {
    'CA': lambda i: (0.01 * i, 0.1 + 0.01 * i, 0.005 * i),
    'NY': lambda i: (1.0 if i % 9 < 3 else 0.1, 0.2 + 0.05 * np.sin(i), 0.3 if i % 5 == 0 else 0.0),
    'TX': lambda i: (np.cos(i / 4.0), np.sin(i / 3.0), 0.02 * i * (i % 2)),
}


def media_frame(n_weeks=N_WEEKS):
    rows = []
    for area in AREAS:
        for i in range(n_weeks):
            label = iso_week_label(FIRST_MONDAY + datetime.timedelta(weeks=i))
            for theme, value in zip(THEMES, SHAPES[area](i)):
                rows.append({'area': area, 'iso_week': label, 'theme': theme, 'attention': float(value)})
    return pd.DataFrame(rows)

def activation_time(i):
    # Fridays between 53 and 64 weeks after the first series week
    return FIRST_MONDAY + datetime.timedelta(weeks=53 + i % 12, days=4)

def write_media_dataset(out_dir, n_users=60, n_subreddits=5, seed=0, params=None):
    """Simulate users, swap their M_* columns for location + t_A and write media.csv; returns the catalog."""
    catalog = synthetic_catalog(n_subreddits, seed=seed)
    observations, _ = forward_sample(params or default_parameters(), catalog, n_users=n_users, seed=seed)
    save_dataset(out_dir, catalog, observations)

    users_path = os.path.join(out_dir, 'users.csv')
    users = pd.read_csv(users_path, dtype=str, keep_default_na=False)
    users = users.drop(columns=list(MEDIA_OVERRIDES))
    users['location'] = [AREAS[i % len(AREAS)] for i in range(len(users))]
    users['t_A'] = [activation_time(i).isoformat() for i in range(len(users))]
    users.to_csv(users_path, index=False)
    media_frame().to_csv(os.path.join(out_dir, 'media.csv'), index=False, float_format='%.17g')
    return catalog
