#include "easey/batchgen.hpp"

#include "easey/error.hpp"
#include "easey/process.hpp"
#include "easey/staging.hpp"

namespace easey {

std::string_view directive_prefix(Scheduler s) {
    return s == Scheduler::slurm ? "#SBATCH " : "#PBS ";
}

std::int64_t derive_nodes(std::int64_t mpi_tasks, std::int64_t tasks_per_node) {
    if (mpi_tasks < 1 || tasks_per_node < 1)
        throw ValueError("derive_nodes needs positive arguments");
    return (mpi_tasks + tasks_per_node - 1) / tasks_per_node;
}

std::string sanitize_job_name(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        unsigned char u = static_cast<unsigned char>(c);
        bool keep = std::isalnum(u) || c == '_' || c == ':' || c == '.' || c == '-';
        out.push_back(keep ? c : '_');
    }
    return out.empty() ? "easey" : out;
}

std::string job_tag(std::string_view job_id) {
    return "easey:" + std::string(job_id);
}

namespace {

std::vector<std::string> slurm_directives(const EaseyConfig& cfg, const JobRefs& job) {
    const auto& dep = cfg.deployment;
    std::vector<std::string> d;
    auto add = [&](std::string s) { d.push_back("#SBATCH " + std::move(s)); };
    add("--job-name=" + sanitize_job_name(cfg.job.name));
    add("--nodes=" + std::to_string(dep.nodes));
    add("--ntasks-per-node=" + std::to_string(dep.tasks_per_node));
    add("--cpus-per-task=" + std::to_string(dep.cores_per_task));
    if (dep.ram_mb)
        add("--mem=" + std::to_string(*dep.ram_mb) + "M");
    add("--time=" + dep.clocktime.str());
    add("--chdir=" + job.workdir);
    add("--output=" + job.stdout_path);
    add("--error=" + job.stderr_path);
    add("--comment=" + job_tag(job.job_id));
    if (!cfg.job.mail.empty()) {
        add("--mail-user=" + cfg.job.mail);
        add("--mail-type=END,FAIL");
    }
    return d;
}

std::vector<std::string> pbs_directives(const EaseyConfig& cfg, const JobRefs& job) {
    const auto& dep = cfg.deployment;
    std::vector<std::string> d;
    auto add = [&](std::string s) { d.push_back("#PBS " + std::move(s)); };
    add("-N " + sanitize_job_name(cfg.job.name));
    add("-l select=" + std::to_string(dep.nodes) + ":ncpus=" + std::to_string(dep.tasks_per_node) +
        ":mpiprocs=" + std::to_string(dep.cores_per_task));
    if (dep.ram_mb)
        add("-l mem=" + std::to_string(*dep.ram_mb) + "mb");
    add("-l walltime=" + dep.clocktime.str());
    add("-o " + job.stdout_path);
    add("-e " + job.stderr_path);
    add("-v EASEY_JOB_TAG=" + job_tag(job.job_id));
    if (!cfg.job.mail.empty()) {
        add("-M " + cfg.job.mail);
        add("-m ae");
    }
    return d;
}

} // namespace

BatchScript render_batch(const EaseyConfig& cfg, const TargetProfile& profile, const JobRefs& job) {
    if (cfg.execution.steps.empty())
        throw EmptyExecution("execution has no steps");

    BatchScript script;
    script.scheduler = profile.scheduler;
    script.directive_lines = profile.scheduler == Scheduler::slurm ? slurm_directives(cfg, job)
                                                                   : pbs_directives(cfg, job);

    auto& prolog = script.prolog_lines;
    prolog.push_back("cd " + shell_quote(job.workdir));
    prolog.push_back("export EASEY_JOB_ID=" + shell_quote(job.job_id));
    if (cfg.data && (!cfg.data->input.empty() || !cfg.data->output.empty())) {
        std::string data_dir = job.workdir + "/" + std::string(kDataFolderName);
        prolog.push_back("export EASEY_DATA=" + shell_quote(data_dir));
        prolog.push_back("export EASEY_DATA_BIND=" + shell_quote("-b " + data_dir + ":" + cfg.data->mount));
    }
    if (!profile.site_mounts.empty()) {
        std::string binds;
        for (const auto& m : profile.site_mounts) {
            if (!binds.empty())
                binds += ' ';
            binds += "-b " + m.host_path + ":" + m.container_path;
        }
        prolog.push_back("export EASEY_SITE_BINDS=" + shell_quote(binds));
    }

    const std::string launcher = profile.launcher();
    for (const auto& step : cfg.execution.steps) {
        if (const auto* s = std::get_if<SerialStep>(&step))
            script.command_lines.push_back(s->command);
        else {
            const auto& m = std::get<MpiStep>(step);
            script.command_lines.push_back(launcher + " " + std::to_string(m.mpi_tasks) + " " + m.command);
        }
    }

    std::string& text = script.full_text;
    text = "#!/bin/bash\n";
    for (const auto& l : script.directive_lines)
        text += l + "\n";
    text += std::string(kPrologMarker) + "\n";
    for (const auto& l : script.prolog_lines)
        text += l + "\n";
    text += std::string(kExecutionMarker) + "\n";
    for (const auto& l : script.command_lines)
        text += l + "\n";
    return script;
}

} // namespace easey
