#include "geophase/optimize.hpp"

#include "geophase/diagnostics.hpp"

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <memory>

namespace geophase {

namespace {

struct Context {
  const Objective *objective;
  Eigen::VectorXd x, g;
};

void load(const gsl_vector *v, Eigen::VectorXd &x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x(i) = gsl_vector_get(v, static_cast<std::size_t>(i));
}

void store(const Eigen::VectorXd &x, gsl_vector *v) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    gsl_vector_set(v, static_cast<std::size_t>(i), x(i));
}

double eval_f(const gsl_vector *v, void *p) {
  auto *c = static_cast<Context *>(p);
  load(v, c->x);
  return (*c->objective)(c->x, nullptr);
}

void eval_df(const gsl_vector *v, void *p, gsl_vector *df) {
  auto *c = static_cast<Context *>(p);
  load(v, c->x);
  (*c->objective)(c->x, &c->g);
  store(c->g, df);
}

void eval_fdf(const gsl_vector *v, void *p, double *f, gsl_vector *df) {
  auto *c = static_cast<Context *>(p);
  load(v, c->x);
  *f = (*c->objective)(c->x, &c->g);
  store(c->g, df);
}

} // namespace

MinimizeResult minimize_bfgs(const Objective &objective, const Eigen::VectorXd &x0,
                             const MinimizeOptions &options) {
  const std::size_t n = static_cast<std::size_t>(x0.size());
  if (n == 0)
    throw DomainError("minimize_bfgs: empty parameter vector");
  gsl_set_error_handler_off();

  Context ctx{&objective, Eigen::VectorXd(x0.size()), Eigen::VectorXd(x0.size())};
  gsl_multimin_function_fdf fn{&eval_f, &eval_df, &eval_fdf, n, &ctx};

  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> start(gsl_vector_alloc(n),
                                                                 &gsl_vector_free);
  store(x0, start.get());
  std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> s(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n),
      &gsl_multimin_fdfminimizer_free);
  gsl_multimin_fdfminimizer_set(s.get(), &fn, start.get(), options.initial_step,
                                options.line_tolerance);

  MinimizeResult r;
  int status = GSL_CONTINUE;
  while (r.iterations < options.max_iterations) {
    if (gsl_blas_dnrm2(s->gradient) < options.gradient_tolerance) {
      status = GSL_SUCCESS;
      break;
    }
    ++r.iterations;
    status = gsl_multimin_fdfminimizer_iterate(s.get());
    if (status != GSL_SUCCESS)
      break; // typically GSL_ENOPROG: the line search cannot improve further
    status = GSL_CONTINUE;
  }
  r.x.resize(x0.size());
  load(s->x, r.x);
  r.value = s->f;
  r.gradient_norm = gsl_blas_dnrm2(s->gradient);
  r.converged = r.gradient_norm < options.gradient_tolerance;
  r.status = status == GSL_CONTINUE ? "iteration limit" : gsl_strerror(status);
  return r;
}

} // namespace geophase
