#pragma once

// External pseudo-Boolean solvers run as subprocesses on an OPB file.
//
// The command is a shell template; {file}, {seed} and {timeout} are
// substituted before it runs. The answer is read from competition-style
// output lines:
//   s SATISFIABLE | s OPTIMUM FOUND | s UNSATISFIABLE | s UNKNOWN
//   v x1 -x2 x3 ...      (any number of v lines; "~x2" also means false)

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "porogen/error.hpp"
#include "porogen/pb.hpp"

namespace porogen {

inline constexpr const char* solver_env_var = "POROGEN_PB_SOLVER";

enum class ExternalStatus { sat, unsat, unknown, error };

struct ExternalAnswer {
    ExternalStatus status = ExternalStatus::error;
    Assignment assignment;
    std::string detail;
};

/// Parses solver output for a formula with num_vars variables.
inline ExternalAnswer parse_solver_output(std::istream& is, std::size_t num_vars) {
    ExternalAnswer ans;
    ans.assignment.assign(num_vars, 0);
    bool have_status = false;
    std::string line;
    while (std::getline(is, line)) {
        if (line.size() < 2 || line[1] != ' ') continue;
        if (line[0] == 's') {
            const std::string s = line.substr(2);
            have_status = true;
            if (s.starts_with("SATISFIABLE") || s.starts_with("OPTIMUM FOUND")) ans.status = ExternalStatus::sat;
            else if (s.starts_with("UNSATISFIABLE")) ans.status = ExternalStatus::unsat;
            else if (s.starts_with("UNKNOWN")) ans.status = ExternalStatus::unknown;
            else ans.status = ExternalStatus::error, ans.detail = "unrecognized status line: " + line;
        } else if (line[0] == 'v') {
            std::istringstream ls(line.substr(2));
            std::string tok;
            while (ls >> tok) {
                bool value = true;
                std::size_t k = 0;
                if (tok[0] == '-' || tok[0] == '~') value = false, k = 1;
                if (tok.size() < k + 2 || tok[k] != 'x') {
                    ans.status = ExternalStatus::error;
                    ans.detail = "bad literal '" + tok + "'";
                    return ans;
                }
                const long idx = std::strtol(tok.c_str() + k + 1, nullptr, 10);
                if (idx < 1 || std::size_t(idx) > num_vars) {
                    ans.status = ExternalStatus::error;
                    ans.detail = "literal out of range '" + tok + "'";
                    return ans;
                }
                ans.assignment[std::size_t(idx - 1)] = value ? 1 : 0;
            }
        }
    }
    if (!have_status) ans.detail = "no status line in solver output";
    return ans;
}

inline std::string substitute(std::string cmd, const std::string& key, const std::string& value) {
    for (std::size_t at = cmd.find(key); at != std::string::npos; at = cmd.find(key, at + value.size()))
        cmd.replace(at, key.size(), value);
    return cmd;
}

inline std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;
};

/// Runs a shell command with stdout captured to a file; kills its process
/// group once the wall clock passes the limit.
inline ProcessResult run_command(const std::string& cmd, double timeout_s, const std::filesystem::path& out_file) {
    const std::string path = out_file.string();  // no allocation after fork
    const pid_t pid = fork();
    if (pid < 0) fail(ErrorKind::backend, "fork failed");
    if (pid == 0) {
        setpgid(0, 0);
        const int fd = open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd < 0 || dup2(fd, STDOUT_FILENO) < 0) _exit(126);
        execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);
    ProcessResult r;
    const auto start = std::chrono::steady_clock::now();
    int status = 0;
    for (;;) {
        const pid_t w = waitpid(pid, &status, WNOHANG);
        if (w == pid) break;
        if (w < 0) fail(ErrorKind::backend, "waitpid failed");
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > timeout_s) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            r.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (!r.timed_out) r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    std::ifstream is(out_file);
    r.output.assign(std::istreambuf_iterator<char>(is), {});
    return r;
}

#ifndef POROGEN_TOOLS_DIR
#define POROGEN_TOOLS_DIR "tools"
#endif

/// The configured solver command: the environment variable if set, else the
/// bundled HiGHS wrapper.
inline std::string default_solver_command() {
    if (const char* env = std::getenv(solver_env_var); env && *env) return env;
    const std::filesystem::path script = std::filesystem::path(POROGEN_TOOLS_DIR) / "opb_milp.py";
    return "python3 " + shell_quote(script.string()) + " {file} --seed {seed} --time-limit {timeout}";
}

} // namespace porogen
