// SPDX-License-Identifier: Apache-2.0

#include "synthaug/trainer_bridge.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

#include "synthaug/error.hpp"
#include "synthaug/text.hpp"

namespace synthaug {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

Hyperparameters default_hyperparameters(TaskKind kind) {
    if (kind == TaskKind::classification) return {"adam", 320, 50, 1e-5, "constant", "best_validation_loss"};
    return {"adam", 5, 32, 5e-5, "linear", "best_validation_loss"};
}

ordered_json to_json(const Hyperparameters& hp) {
    ordered_json j;
    j["optimizer"] = hp.optimizer;
    j["epochs"] = hp.epochs;
    j["batch_size"] = hp.batch_size;
    j["learning_rate"] = hp.learning_rate;
    j["lr_schedule"] = hp.lr_schedule;
    j["checkpoint_selection"] = hp.checkpoint_selection;
    return j;
}

ordered_json task_card_json(const TaskSpec& task) {
    ordered_json j;
    j["task"] = to_json(task);
    j["kind"] = to_string(task.kind);
    j["label_set"] = task.label_set;
    j["hyperparameters"] = to_json(default_hyperparameters(task.kind));
    j["files"] = {{"train", "train.jsonl"}, {"dev", "dev.jsonl"}, {"test", "test.jsonl"}};
    return j;
}

ExportManifest export_training_set(std::span<const Example> train, const Dataset& dev, const Dataset& test,
                                   const TaskSpec& task, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create export directory " + dir.string() + ": " + ec.message());

    ExportManifest m;
    m.dir = dir;
    m.train = dir / "train.jsonl";
    m.dev = dir / "dev.jsonl";
    m.test = dir / "test.jsonl";
    m.task_card = dir / "task_card.json";
    write_file(m.train, to_jsonl(train));
    write_file(m.dev, to_jsonl(dev.examples()));
    write_file(m.test, to_jsonl(test.examples()));
    write_file(m.task_card, task_card_json(task).dump(2) + "\n");
    return m;
}

ExportManifest export_training_set(const AugmentedDataset& a, const Dataset& dev, const Dataset& test,
                                   const TaskSpec& task, const fs::path& dir) {
    return export_training_set(std::span<const Example>(a.examples), dev, test, task, dir);
}

void TrainerContract::validate() const {
    if (command.empty() || command.front().empty()) throw ValidationError("trainer: command is empty");
    for (const char* ph : {kTrainPlaceholder, kDevPlaceholder, kTestPlaceholder, kOutPlaceholder}) {
        const bool found = std::any_of(command.begin(), command.end(),
                                       [&](const std::string& arg) { return arg.find(ph) != std::string::npos; });
        if (!found) throw ValidationError(std::string("trainer: command template lacks placeholder ") + ph);
    }
    if (timeout.count() <= 0) throw ValidationError("trainer: timeout must be positive");
}

TrainerContract trainer_from_json(const json& j, const fs::path& base_dir, TaskKind kind) {
    if (!j.is_object()) throw ValidationError("trainer: expected an object");
    TrainerContract c;
    c.expected_metrics = kind;
    if (!j.contains("command") || !j.at("command").is_array()) {
        throw ValidationError("trainer: 'command' must be an array of strings");
    }
    for (const auto& arg : j.at("command")) {
        if (!arg.is_string()) throw ValidationError("trainer: 'command' must be an array of strings");
        c.command.push_back(arg.get<std::string>());
    }
    // A relative program path with a slash is taken relative to the manifest.
    if (!c.command.empty() && c.command[0].find('/') != std::string::npos && fs::path(c.command[0]).is_relative()) {
        c.command[0] = (base_dir / c.command[0]).lexically_normal().string();
    }
    c.workdir = base_dir;
    if (j.contains("workdir")) {
        fs::path w = j.at("workdir").get<std::string>();
        c.workdir = w.is_relative() ? base_dir / w : w;
    }
    if (j.contains("timeout_s")) {
        const double t = j.at("timeout_s").get<double>();
        if (!(t > 0.0)) throw ValidationError("trainer: timeout_s must be positive");
        c.timeout = std::chrono::milliseconds(static_cast<long long>(t * 1000.0));
    }
    c.validate();
    return c;
}

ordered_json to_json(const TrainerContract& contract) {
    ordered_json j;
    j["command"] = contract.command;
    j["workdir"] = contract.workdir.string();
    j["timeout_s"] = static_cast<double>(contract.timeout.count()) / 1000.0;
    j["expected_metrics"] = to_string(contract.expected_metrics);
    return j;
}

StudentResult parse_student_metrics(const json& j, TaskKind expected) {
    if (!j.is_object()) throw MetricsSchemaError("<root>");
    StudentResult r;
    if (!j.contains("trainer_id") || !j.at("trainer_id").is_string()) throw MetricsSchemaError("trainer_id");
    r.trainer_id = j.at("trainer_id").get<std::string>();
    if (!j.contains("dev")) throw MetricsSchemaError("dev");
    if (!j.contains("test")) throw MetricsSchemaError("test");
    r.dev_metrics = metrics_from_json(j.at("dev"), "dev");
    r.test_metrics = metrics_from_json(j.at("test"), "test");
    // A report of the wrong kind lacks the fields this task needs.
    const char* want = expected == TaskKind::classification ? "accuracy" : "rougeL";
    if (r.dev_metrics.kind != expected) throw MetricsSchemaError(std::string("dev.") + want);
    if (r.test_metrics.kind != expected) throw MetricsSchemaError(std::string("test.") + want);
    return r;
}

ordered_json to_json(const StudentResult& result) {
    ordered_json j;
    j["trainer_id"] = result.trainer_id;
    j["dev"] = to_json(result.dev_metrics);
    j["test"] = to_json(result.test_metrics);
    return j;
}

namespace {

std::string substitute(std::string arg, const std::string& key, const std::string& value) {
    for (std::size_t pos = arg.find(key); pos != std::string::npos; pos = arg.find(key, pos + value.size())) {
        arg.replace(pos, key.size(), value);
    }
    return arg;
}

bool program_exists(const std::string& program) {
    if (program.find('/') != std::string::npos) return ::access(program.c_str(), X_OK) == 0;
    const char* path = std::getenv("PATH");
    if (path == nullptr) return false;
    std::string_view rest(path);
    while (true) {
        const auto colon = rest.find(':');
        fs::path dir(std::string(rest.substr(0, colon)));
        if (dir.empty()) dir = ".";
        if (::access((dir / program).c_str(), X_OK) == 0) return true;
        if (colon == std::string_view::npos) return false;
        rest.remove_prefix(colon + 1);
    }
}

constexpr std::size_t kStderrCap = 64 * 1024;

}  // namespace

StudentResult invoke_trainer(const TrainerContract& contract, const ExportManifest& files, const fs::path& out_dir) {
    contract.validate();
    if (!program_exists(contract.command.front())) {
        throw ValidationError("trainer: command not found: " + contract.command.front());
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create trainer output directory " + out_dir.string() + ": " + ec.message());
    const fs::path metrics_path = out_dir / "metrics.json";
    fs::remove(metrics_path, ec);

    std::vector<std::string> argv_s;
    for (const auto& arg : contract.command) {
        std::string a = substitute(arg, kTrainPlaceholder, fs::absolute(files.train).string());
        a = substitute(a, kDevPlaceholder, fs::absolute(files.dev).string());
        a = substitute(a, kTestPlaceholder, fs::absolute(files.test).string());
        a = substitute(a, kOutPlaceholder, fs::absolute(out_dir).string());
        argv_s.push_back(std::move(a));
    }
    std::vector<char*> argv;
    for (auto& a : argv_s) argv.push_back(a.data());
    argv.push_back(nullptr);
    const std::string workdir = contract.workdir.string();
    const std::string log_path = fs::absolute(out_dir / "trainer.stdout").string();

    int err_pipe[2];
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) throw TrainerError(std::string("pipe: ") + std::strerror(errno));

    const auto started = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(err_pipe[0]);
        ::close(err_pipe[1]);
        throw TrainerError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(err_pipe[1], STDERR_FILENO);
        const int out = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (out >= 0) ::dup2(out, STDOUT_FILENO);
        if (::chdir(workdir.c_str()) != 0) {
            const std::string msg = "cannot enter workdir " + workdir + "\n";
            (void)!::write(STDERR_FILENO, msg.data(), msg.size());
            ::_exit(126);
        }
        ::execvp(argv[0], argv.data());
        const std::string msg = std::string("exec ") + argv[0] + ": " + std::strerror(errno) + "\n";
        (void)!::write(STDERR_FILENO, msg.data(), msg.size());
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(err_pipe[1]);

    std::string captured;
    const auto deadline = started + contract.timeout;
    bool timed_out = false;
    bool pipe_open = true;
    int status = 0;
    bool exited = false;
    char buf[4096];
    while (!exited) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            timed_out = true;
            break;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        if (pipe_open) {
            pollfd pfd{err_pipe[0], POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 50)));
            if (rc > 0) {
                const ssize_t n = ::read(err_pipe[0], buf, sizeof buf);
                if (n > 0) {
                    if (captured.size() < kStderrCap) captured.append(buf, static_cast<std::size_t>(n));
                } else if (n == 0) {
                    pipe_open = false;
                }
            }
        } else {
            ::usleep(static_cast<useconds_t>(std::min<long long>(left, 20) * 1000));
        }
        const pid_t w = ::waitpid(pid, &status, WNOHANG);
        if (w == pid) exited = true;
    }
    if (timed_out) {
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        ::close(err_pipe[0]);
        throw TrainerTimeout("trainer exceeded its timeout of " + std::to_string(contract.timeout.count()) + " ms");
    }
    // Drain whatever the child wrote before exiting. Grandchildren holding the
    // pipe open are not waited for.
    ::fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);
    while (pipe_open) {
        const ssize_t n = ::read(err_pipe[0], buf, sizeof buf);
        if (n <= 0) break;
        if (captured.size() < kStderrCap) captured.append(buf, static_cast<std::size_t>(n));
    }
    ::close(err_pipe[0]);
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    int code = 0;
    if (WIFEXITED(status)) code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) code = 128 + WTERMSIG(status);
    if (code != 0) throw TrainerFailed(code, captured);

    if (!fs::exists(metrics_path)) throw MetricsSchemaError("metrics.json");
    json doc;
    try {
        doc = json::parse(read_file(metrics_path));
    } catch (const json::parse_error&) {
        throw MetricsSchemaError("metrics.json");
    }
    StudentResult r = parse_student_metrics(doc, contract.expected_metrics);
    r.wall_time = elapsed;
    return r;
}

namespace {

// Both inputs sorted and duplicate-free.
double jaccard_sorted(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) ++i;
        else if (*j < *i) ++j;
        else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double jaccard(std::vector<std::string> a, std::vector<std::string> b) {
    for (auto* v : {&a, &b}) {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
    }
    return jaccard_sorted(a, b);
}

namespace {

std::vector<std::string> token_set(std::string_view text) {
    auto t = tokenize(text);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

}  // namespace

std::vector<Example> baseline_predict(const Dataset& train, const Dataset& eval) {
    if (train.empty()) throw ValidationError("baseline student: empty training set");
    std::vector<std::vector<std::string>> sets;
    sets.reserve(train.size());
    std::unordered_map<std::string_view, std::size_t> exact;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (!train[i].output) throw ValidationError("baseline student: training example '" + train[i].id + "' is unlabeled");
        sets.push_back(token_set(train[i].input));
        exact.emplace(train[i].input, i);
    }

    std::vector<Example> predictions;
    predictions.reserve(eval.size());
    for (const auto& ex : eval.examples()) {
        std::size_t best = 0;
        if (auto it = exact.find(ex.input); it != exact.end()) {
            best = it->second;
        } else {
            const auto q = token_set(ex.input);
            double best_score = -1.0;
            for (std::size_t i = 0; i < sets.size(); ++i) {
                const double s = jaccard_sorted(q, sets[i]);
                if (s > best_score) {
                    best_score = s;
                    best = i;
                }
            }
        }
        predictions.push_back({ex.id, ex.input, train[best].output});
    }
    return predictions;
}

MetricsReport evaluate_predictions(std::span<const Example> predictions, const Dataset& gold, const TaskSpec& task) {
    if (task.kind == TaskKind::classification) return make_report(accuracy(predictions, gold.examples(), true));
    std::unordered_map<std::string_view, const Example*> by_id;
    for (const auto& p : predictions) by_id.emplace(p.id, &p);
    if (predictions.size() != gold.size()) {
        throw ValidationError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                              std::to_string(gold.size()) + " gold examples");
    }
    std::vector<TextPair> pairs;
    pairs.reserve(gold.size());
    for (const auto& g : gold.examples()) {
        auto it = by_id.find(g.id);
        if (it == by_id.end()) throw ValidationError("evaluate: no prediction for id '" + g.id + "'");
        pairs.emplace_back(it->second->output.value_or(""), g.output.value_or(""));
    }
    return make_report(corpus_rouge(pairs));
}

MetricsReport baseline_student(const Dataset& train, const Dataset& eval, const TaskSpec& task) {
    const auto predictions = baseline_predict(train, eval);
    return evaluate_predictions(predictions, eval, task);
}

StudentResult run_baseline_trainer(const fs::path& train, const fs::path& dev, const fs::path& test,
                                   const fs::path& out_dir) {
    const fs::path card_path = train.parent_path() / "task_card.json";
    if (!fs::exists(card_path)) throw ValidationError("baseline trainer: no task_card.json next to " + train.string());
    json card;
    try {
        card = json::parse(read_file(card_path));
    } catch (const json::parse_error& e) {
        throw ValidationError("baseline trainer: " + card_path.string() + ": " + e.what());
    }
    if (!card.contains("task")) throw ValidationError("baseline trainer: task card lacks 'task'");
    const TaskSpec task = task_from_json(card.at("task"));

    const auto started = std::chrono::steady_clock::now();
    const Dataset train_ds = load_jsonl(train, Split::train, task);
    const Dataset dev_ds = load_jsonl(dev, Split::dev, task);
    const Dataset test_ds = load_jsonl(test, Split::test, task);

    StudentResult r;
    r.trainer_id = kBaselineTrainerId;
    r.dev_metrics = baseline_student(train_ds, dev_ds, task);
    r.test_metrics = baseline_student(train_ds, test_ds, task);
    r.wall_time =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    write_file(out_dir / "metrics.json", to_json(r).dump(2) + "\n");
    return r;
}

}  // namespace synthaug
