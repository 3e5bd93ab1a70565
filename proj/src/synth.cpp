#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dengue/csv.hpp"
#include "dengue/error.hpp"
#include "dengue/experiments.hpp"
#include "dengue/rng.hpp"

namespace dengue {

namespace {

using namespace std::chrono;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Unit-variance AR(1) series of length n.
std::vector<double> ar1(std::size_t n, double phi, Rng& rng) {
  std::vector<double> out(n);
  const double innovation = std::sqrt(1.0 - phi * phi);
  double x = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    x = phi * x + innovation * rng.normal();
    out[i] = x;
  }
  return out;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void SynthSpec::validate() const {
  if (districts < 1) throw Error(ErrorKind::Validation, "synthetic data needs at least one district");
  if (months < lag + 2) {
    throw Error(ErrorKind::Validation, "months must be at least lag + 2 (" + std::to_string(lag + 2) + ")");
  }
  if (!seasonality.empty() && seasonality.size() != districts) {
    throw Error(ErrorKind::Validation, "seasonality must list one entry per district");
  }
  if (!(beta >= 0.0)) throw Error(ErrorKind::Validation, "beta must be >= 0");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::Validation, "noise_sigma must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw Error(ErrorKind::Validation, "missing_rate must lie in [0, 1)");
  if (houses_per_survey < 1) throw Error(ErrorKind::Validation, "houses_per_survey must be >= 1");
}

std::string district_name(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "D%02zu", index + 1);
  return buf;
}

SynthBundle synth_generate(const SynthSpec& spec) {
  spec.validate();
  SynthBundle out;
  const YearMonth first{spec.start_year, 1};
  const int first_ord = first.ordinal();
  const int last_ord = first_ord + static_cast<int>(spec.months) - 1;
  // Hidden history so lagged drivers exist for the first observed months.
  const std::size_t preroll = spec.lag + 12;
  const std::size_t span = preroll + spec.months;

  Rng season_rng(derive_seed(spec.seed, "seasonality"));
  std::vector<DistrictSeasonality> seasons = spec.seasonality;
  if (seasons.empty()) {
    for (std::size_t d = 0; d < spec.districts; ++d) {
      const double amplitude = season_rng.uniform(0.8, 1.2);
      const double phase = season_rng.uniform(-1.0, 1.0);
      seasons.push_back({amplitude, phase});
    }
  }

  // ISO weeks whose Thursday falls inside the observed months.
  std::vector<std::pair<int, int>> weeks;
  for (int y = spec.start_year - 1; y <= YearMonth::from_ordinal(last_ord).year + 1; ++y) {
    for (int w = 1; w <= iso_weeks_in_year(y); ++w) {
      const int ord = month_of(iso_week_thursday(y, w)).ordinal();
      if (ord >= first_ord && ord <= last_ord) weeks.emplace_back(y, w);
    }
  }

  Rng mask_rng(derive_seed(spec.seed, "larval-mask"));
  for (std::size_t d = 0; d < spec.districts; ++d) {
    const std::string name = district_name(d);
    Rng rng(derive_seed(spec.seed, "district:" + name));
    const auto [amp, phase] = seasons[d];
    const double base_rate = rng.uniform(10.0, 30.0);

    const auto temp_anom = ar1(span, 0.5, rng);
    const auto rh_anom = ar1(span, 0.5, rng);
    // White, so the larval response to last month's rain shares no signal with
    // the incidence response at `lag`.
    const auto rain_anom = ar1(span, 0.0, rng);
    const auto control = ar1(span, 0.6, rng);

    auto angle = [&](std::size_t i) {
      const int month = YearMonth::from_ordinal(first_ord - static_cast<int>(preroll) + static_cast<int>(i)).month;
      return kTwoPi * (static_cast<double>(month - 1) + phase) / 12.0;
    };

    std::vector<double> temp_month(span);
    std::vector<double> rh_month(span);
    std::vector<double> rain_month(span);
    for (std::size_t i = 0; i < span; ++i) {
      const double a = angle(i);
      temp_month[i] = 28.0 + 3.0 * amp * std::sin(a) + 1.2 * temp_anom[i];
      rh_month[i] = std::clamp(70.0 + 12.0 * amp * std::sin(a + kTwoPi * 3.0 / 12.0) + 5.0 * rh_anom[i], 5.0, 98.0);
      rain_month[i] = std::max(0.0, 90.0 + 80.0 * amp * std::sin(a + kTwoPi * 6.0 / 12.0) + 45.0 * rain_anom[i]);
    }

    // Daily readings.
    for (std::size_t m = 0; m < spec.months; ++m) {
      const std::size_t i = preroll + m;
      const YearMonth ym = YearMonth::from_ordinal(first_ord + static_cast<int>(m));
      const auto ymd_last = year_month_day_last{year{ym.year}, month_day_last{month{static_cast<unsigned>(ym.month)}}};
      const unsigned n_days = static_cast<unsigned>(ymd_last.day());
      for (unsigned day_of = 1; day_of <= n_days; ++day_of) {
        RawClimateReading r;
        r.district = name;
        r.date = Date{year{ym.year}, month{static_cast<unsigned>(ym.month)}, day{day_of}};
        r.temperature = temp_month[i] + spec.noise_sigma * rng.normal();
        r.relative_humidity = std::clamp(rh_month[i] + 3.0 * spec.noise_sigma * rng.normal(), 0.0, 100.0);
        out.climate.push_back(std::move(r));
      }
    }

    // Weekly rainfall.
    for (const auto& [y, w] : weeks) {
      const int ord = month_of(iso_week_thursday(y, w)).ordinal();
      const std::size_t i = preroll + static_cast<std::size_t>(ord - first_ord);
      const double weekly = rain_month[i] * 7.0 / 30.44;
      out.rain.push_back({name, y, w, std::max(0.0, weekly * (1.0 + 0.3 * spec.noise_sigma * rng.normal()))});
    }

    // Larval surveys, then incidence.
    for (std::size_t m = 0; m < spec.months; ++m) {
      const std::size_t i = preroll + m;
      const YearMonth ym = YearMonth::from_ordinal(first_ord + static_cast<int>(m));
      const double a = angle(i);

      const double z = 0.9 * std::sin(a) + 0.6 * rh_anom[i] + 0.35 * rain_anom[i - 1] + 0.45 * control[i];
      const double latent = 1.0 + 2.0 * logistic(z);
      const double s = (latent - 1.0) / 2.0;
      const double p_low = (1.0 - s) * (1.0 - s);
      const double p_mid = 2.0 * s * (1.0 - s);
      LarvalSurvey survey{name, ym, 0, 0, 0};
      for (std::int64_t h = 0; h < spec.houses_per_survey; ++h) {
        const double u = rng.uniform();
        if (u < p_low) {
          ++survey.n_low;
        } else if (u < p_low + p_mid) {
          ++survey.n_mid;
        } else {
          ++survey.n_high;
        }
      }
      const double index = *weighted_larval_index(survey.n_low, survey.n_mid, survey.n_high);
      out.answer.push_back({name, ym, index});
      const bool missing = mask_rng.uniform() < spec.missing_rate;
      out.larval.push_back({survey, missing});

      const std::size_t lagged = i - spec.lag;
      const double log_rate = std::log(base_rate) + 0.3 * std::cos(a) + 0.55 * rain_anom[lagged] +
                              0.35 * temp_anom[lagged] + spec.beta * (index - 2.0);
      out.cases.push_back({name, ym, rng.poisson(std::exp(log_rate))});
    }
  }
  return out;
}

std::string answer_csv(const std::vector<LarvalAnswer>& answer) {
  std::string out = "district,year,month,larval_index\n";
  for (const auto& a : answer) {
    out += a.district + "," + std::to_string(a.month.year) + "," + std::to_string(a.month.month) + "," +
           csv::format_double(a.larval_index) + "\n";
  }
  return out;
}

std::vector<LarvalAnswer> read_answer(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  csv::require_header(table, {"district", "year", "month", "larval_index"});
  std::vector<LarvalAnswer> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = table.where(i);
    out.push_back({row[0],
                   {static_cast<int>(csv::parse_int(row[1], where)), static_cast<int>(csv::parse_int(row[2], where))},
                   csv::parse_double(row[3], where)});
  }
  return out;
}

void write_bundle(const SynthBundle& bundle, const std::filesystem::path& dir) {
  csv::write_file(dir / "climate.csv", io::climate_csv(bundle.climate));
  csv::write_file(dir / "rain.csv", io::rain_csv(bundle.rain));
  csv::write_file(dir / "larval.csv", io::larval_csv(bundle.larval));
  csv::write_file(dir / "cases.csv", io::cases_csv(bundle.cases));
  csv::write_file(dir / "larval_answer.csv", answer_csv(bundle.answer));
}

std::vector<DistrictMonthRecord> bundle_records(const SynthBundle& bundle) {
  std::vector<LarvalSurvey> surveys;
  for (const auto& row : bundle.larval)
    if (!row.missing) surveys.push_back(row.survey);
  return assemble_records(aggregate_monthly(bundle.climate), rain_to_monthly(bundle.rain), surveys, bundle.cases);
}

}  // namespace dengue
