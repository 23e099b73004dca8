use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataCenterSpec {
    pub host_count: u32,
    pub cores_per_host: u32,
    pub ram_per_host: f64,
    pub storage_per_host_tb: f64,
    /// Share of a host given to one VM.
    pub vm_fraction_of_host: f64,
}

impl Default for DataCenterSpec {
    fn default() -> Self {
        Self { host_count: 500, cores_per_host: 8, ram_per_host: 16.0, storage_per_host_tb: 1.0, vm_fraction_of_host: 0.125 }
    }
}

impl DataCenterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.host_count == 0
            || self.cores_per_host == 0
            || !(self.ram_per_host > 0.0)
            || !(self.storage_per_host_tb > 0.0)
            || !(self.vm_fraction_of_host > 0.0 && self.vm_fraction_of_host <= 1.0)
        {
            return Err(Error::invalid("data-center dimensions must be positive"));
        }
        let vms = 1.0 / self.vm_fraction_of_host;
        let cores = self.vm_fraction_of_host * f64::from(self.cores_per_host);
        if (vms - vms.round()).abs() > 1e-9 || (cores - cores.round()).abs() > 1e-9 || cores.round() < 1.0 {
            return Err(Error::invalid("VM fraction must split a host into whole VMs of whole cores"));
        }
        Ok(())
    }

    pub fn vms_per_host(&self) -> u32 {
        (1.0 / self.vm_fraction_of_host).round() as u32
    }

    pub fn cores_per_vm(&self) -> u32 {
        (self.vm_fraction_of_host * f64::from(self.cores_per_host)).round() as u32
    }

    pub fn ram_per_vm(&self) -> f64 {
        self.ram_per_host * self.vm_fraction_of_host
    }

    pub fn vm_capacity(&self) -> u32 {
        self.host_count * self.vms_per_host()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimPolicy {
    pub provisioning_period: u32,
    /// How far past a window start its sizing looks.
    pub plan_horizon: u32,
    pub vm_boot_delay: u32,
    pub service_time: f64,
    pub response_target: f64,
}

impl Default for SimPolicy {
    fn default() -> Self {
        Self { provisioning_period: 300, plan_horizon: 300, vm_boot_delay: 120, service_time: 0.100, response_target: 0.500 }
    }
}

impl SimPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.provisioning_period == 0 || self.plan_horizon == 0 {
            return Err(Error::invalid("provisioning period and horizon must be positive"));
        }
        if self.vm_boot_delay > self.provisioning_period {
            return Err(Error::invalid("VM boot delay must not exceed the provisioning period"));
        }
        if !(self.service_time > 0.0 && self.service_time <= self.response_target) {
            return Err(Error::invalid("policy needs 0 < service_time <= response_target"));
        }
        Ok(())
    }

    pub(crate) fn service_us(&self) -> i64 {
        (self.service_time * 1e6).round() as i64
    }

    pub(crate) fn response_us(&self) -> i64 {
        (self.response_target * 1e6).round() as i64
    }

    /// Requests a VM may hold (in service plus waiting) and still admit one more.
    pub fn queue_budget(&self) -> i64 {
        self.response_us() / self.service_us() - 1
    }
}
