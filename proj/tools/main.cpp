#include <cstdio>
#include <exception>

#include "cli_common.hpp"

int main(int argc, char** argv) {
  using namespace omgmap;
  using namespace omgmap::cli;
  CLI::App app{"Multi-resolution elevation mapping and landing site detection"};
  app.require_subcommand(1);
  add_simulate(app);
  add_run(app);
  add_bench(app);
  add_eval(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  } catch (const ConfigError& e) {
    std::fflush(stdout);
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const FormatError& e) {
    std::fflush(stdout);
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kFormat;
  } catch (const AssertionFailure& e) {
    std::fflush(stdout);
    std::fprintf(stderr, "check failed: %s\n", e.what());
    return kAssertion;
  } catch (const std::exception& e) {
    std::fflush(stdout);
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOk;
}
